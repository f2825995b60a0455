//! Empirical weak-maximum-principle constant.
//!
//! For a support `S` and an evaluation point `x` outside it, the largest
//! `G mu (x)` over measures on `S` with `G mu <= 1` on `S` is a small LP.
//! The constant is the maximum of these optima (and 1, attained on `S`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::Kernel;
use crate::error::{Error, Result};
use crate::lp::{DenseLp, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WmpMode {
    /// Every nonempty support (falls back to sampling above `exact_limit`).
    Exact,
    /// `budget` random supports.
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmpOptions {
    pub mode: WmpMode,
    /// Exact mode: cap on the number of LPs. Sampled mode: number of supports.
    pub budget: Option<usize>,
    pub exact_limit: usize,
    pub seed: u64,
}

impl Default for WmpOptions {
    fn default() -> Self {
        Self {
            mode: WmpMode::Exact,
            budget: None,
            exact_limit: 12,
            seed: 0,
        }
    }
}

const DEFAULT_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WmpWitness {
    /// Measure on the support, indexed over all points.
    pub measure: Vec<f64>,
    pub point: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WmpReport {
    pub b_empirical: f64,
    /// `2 kappa` for symmetric kernels.
    pub b_theoretical: Option<f64>,
    pub witness: Option<WmpWitness>,
    pub exact: bool,
    pub supports_examined: usize,
    pub lps_solved: usize,
}

impl WmpReport {
    pub fn within_bound(&self) -> Option<bool> {
        self.b_theoretical
            .map(|b| self.b_empirical <= b * (1.0 + 1e-9))
    }
}

struct Best {
    value: f64,
    order: usize,
    witness: WmpWitness,
}

fn better(a: Best, b: Best) -> Best {
    if b.value > a.value || (b.value == a.value && b.order < a.order) {
        b
    } else {
        a
    }
}

fn support_optimum(kernel: &Kernel, support: &[usize], order: usize) -> Result<Option<Best>> {
    let k = support.len();
    let a: Vec<f64> = support
        .iter()
        .flat_map(|&s| support.iter().map(move |&y| kernel.get(s, y)))
        .collect();
    let mut best: Option<Best> = None;
    let mask: Vec<bool> = {
        let mut m = vec![false; kernel.n()];
        support.iter().for_each(|&s| m[s] = true);
        m
    };
    for x in (0..kernel.n()).filter(|&x| !mask[x]) {
        let c: Vec<f64> = support.iter().map(|&y| kernel.get(x, y)).collect();
        let sol = DenseLp::new(a.clone(), vec![1.0; k], c)?.solve()?;
        if sol.status == LpStatus::Unbounded {
            // G > 0 makes the feasible region bounded.
            return Err(Error::InvalidInput("unbounded WMP program".into()));
        }
        let mut measure = vec![0.0; kernel.n()];
        for (i, &y) in support.iter().enumerate() {
            measure[y] = sol.x[i];
        }
        let cand = Best {
            value: sol.objective,
            order,
            witness: WmpWitness { measure, point: x },
        };
        best = Some(match best {
            None => cand,
            Some(b) => better(b, cand),
        });
    }
    Ok(best)
}

/// Computes the empirical WMP constant of `kernel`.
pub fn wmp_constant(kernel: &Kernel, options: &WmpOptions) -> Result<WmpReport> {
    let n = kernel.n();
    let exact = options.mode == WmpMode::Exact && n <= options.exact_limit;
    let supports: Vec<Vec<usize>> = if exact {
        (1u64..(1u64 << n))
            .filter(|mask| mask.count_ones() < n as u32)
            .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect())
            .collect()
    } else {
        let count = options.budget.unwrap_or(DEFAULT_SAMPLES);
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut out = Vec::with_capacity(count);
        while out.len() < count && n > 1 {
            let s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if !s.is_empty() && s.len() < n {
                out.push(s);
            }
        }
        out
    };

    let b_theoretical = kernel
        .quasi_metric()
        .ok()
        .map(|qm| 2.0 * qm.effective());
    let baseline = Best {
        value: 1.0,
        order: usize::MAX,
        witness: WmpWitness {
            measure: {
                let mut m = vec![0.0; n];
                m[0] = 1.0 / kernel.get(0, 0);
                m
            },
            point: 0,
        },
    };

    // in exact mode the budget counts LPs; stop at the last whole support
    let mut usable = supports.len();
    let mut truncated = false;
    if exact {
        if let Some(budget) = options.budget {
            let mut lps = 0;
            for (i, s) in supports.iter().enumerate() {
                if lps + (n - s.len()) > budget {
                    usable = i;
                    truncated = true;
                    break;
                }
                lps += n - s.len();
            }
        }
    }

    let results: Vec<Option<Best>> = supports[..usable]
        .par_iter()
        .enumerate()
        .map(|(order, s)| support_optimum(kernel, s, order))
        .collect::<Result<_>>()?;
    let lps_solved = supports[..usable].iter().map(|s| n - s.len()).sum();
    let best = results.into_iter().flatten().fold(baseline, better);
    let report = WmpReport {
        b_empirical: best.value.max(1.0),
        b_theoretical,
        witness: Some(best.witness),
        exact: exact && !truncated,
        supports_examined: usable,
        lps_solved,
    };
    if truncated {
        return Err(Error::BudgetExhausted {
            budget: options.budget.unwrap_or(0),
            best: Box::new(report),
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_example_is_one() {
        let k = Kernel::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = wmp_constant(&k, &WmpOptions::default()).unwrap();
        assert!(r.exact);
        assert!((r.b_empirical - 1.0).abs() < 1e-14);
        assert!((r.b_theoretical.unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert_eq!(r.within_bound(), Some(true));
    }

    #[test]
    fn one_point_is_one() {
        let k = Kernel::from_rows(vec![vec![3.0]]).unwrap();
        let r = wmp_constant(&k, &WmpOptions::default()).unwrap();
        assert_eq!(r.b_empirical, 1.0);
        assert_eq!(r.supports_examined, 0);
    }

    #[test]
    fn large_off_diagonal_exceeds_one() {
        // G(2, .) large relative to the diagonal of the support {0}
        let k = Kernel::from_rows(vec![
            vec![1.0, 1.0, 3.0],
            vec![1.0, 1.0, 1.0],
            vec![3.0, 1.0, 4.0],
        ])
        .unwrap();
        let r = wmp_constant(&k, &WmpOptions::default()).unwrap();
        assert!((r.b_empirical - 3.0).abs() < 1e-12, "{}", r.b_empirical);
        let w = r.witness.unwrap();
        assert_eq!(w.point, 2);
    }

    #[test]
    fn budget_exhaustion_returns_best() {
        let k = Kernel::from_rows(vec![
            vec![2.0, 1.0, 1.0],
            vec![1.0, 2.0, 1.0],
            vec![1.0, 1.0, 2.0],
        ])
        .unwrap();
        let opts = WmpOptions {
            budget: Some(3),
            ..WmpOptions::default()
        };
        match wmp_constant(&k, &opts) {
            Err(Error::BudgetExhausted { best, .. }) => assert!(best.b_empirical >= 1.0),
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..14)
            .map(|i| (0..14).map(|j| 1.0 / (1.0 + (i as f64 - j as f64).abs())).collect())
            .collect();
        let k = Kernel::from_rows(rows).unwrap();
        let opts = WmpOptions {
            budget: Some(40),
            seed: 7,
            ..WmpOptions::default()
        };
        let a = wmp_constant(&k, &opts).unwrap();
        let b = wmp_constant(&k, &opts).unwrap();
        assert!(!a.exact);
        assert_eq!(a, b);
        assert!(a.within_bound().unwrap());
    }
}
