//! Localized embedding constants `kappa(E)`.
//!
//! `kappa(E)` is the least `C` with `||G nu||_{L^q(sigma_E)} <= C ||nu||`.
//! By homogeneity it is `Phi*^(1/q)`, where `Phi(nu) = sum_{y in E} sigma_y
//! (G nu)(y)^q` is maximized over probability vectors. `Phi` is concave, so
//! an away-step conditional-gradient method with exact line search gives
//! both a maximizer and the duality gap `max_z grad_z - grad . nu`, which
//! bounds `Phi* - Phi(nu)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numeric::{compensated_sum, Exponent};
use crate::space::{IndexSet, Measure};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingOptions {
    pub gap_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub line_search_steps: usize,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            rel_tol: 1e-8,
            max_iter: 100_000,
            line_search_steps: 30,
        }
    }
}

impl EmbeddingOptions {
    fn threshold(&self, phi: f64) -> f64 {
        self.gap_tol.max(self.rel_tol * phi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingCertificate {
    pub set_e: IndexSet,
    /// `kappa(E)`.
    pub value: f64,
    /// `Phi` at the maximizer.
    pub phi: f64,
    /// Probability vector over all points.
    pub maximizer: Vec<f64>,
    /// Upper bound on `Phi* - phi`.
    pub gap: f64,
    pub iterations: usize,
}

impl EmbeddingCertificate {
    fn trivial(set_e: IndexSet, n: usize) -> Self {
        Self {
            set_e,
            value: 0.0,
            phi: 0.0,
            maximizer: vec![1.0 / n as f64; n],
            gap: 0.0,
            iterations: 0,
        }
    }

    /// `value` upper bound implied by the gap.
    pub fn upper_value(&self, q: f64) -> f64 {
        (self.phi + self.gap).powf(1.0 / q)
    }
}

/// Objective restricted to the active rows `y in E` with `sigma_y > 0`.
struct Objective<'a> {
    kernel: &'a Kernel,
    rows: Vec<usize>,
    weights: Vec<f64>,
    q: f64,
}

impl Objective<'_> {
    fn potential(&self, nu: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|&y| crate::numeric::dot(self.kernel.row(y), nu))
            .collect()
    }

    fn value(&self, w: &[f64]) -> f64 {
        compensated_sum(self.weights.iter().zip(w).map(|(s, v)| s * v.powf(self.q)))
    }

    // q sum_y sigma_y w_y^{q-1} G(y, z)
    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let coef: Vec<f64> = self
            .weights
            .iter()
            .zip(w)
            .map(|(s, v)| self.q * s * v.powf(self.q - 1.0))
            .collect();
        (0..self.kernel.n())
            .map(|z| {
                compensated_sum(
                    self.rows
                        .iter()
                        .zip(&coef)
                        .map(|(&y, c)| c * self.kernel.get(y, z)),
                )
            })
            .collect()
    }

    // derivative of gamma -> Phi along w + gamma dw
    fn slope(&self, w: &[f64], dw: &[f64], gamma: f64) -> f64 {
        compensated_sum(
            self.weights
                .iter()
                .zip(w.iter().zip(dw))
                .map(|(s, (v, d))| self.q * s * (v + gamma * d).powf(self.q - 1.0) * d),
        )
    }

    fn value_along(&self, w: &[f64], dw: &[f64], gamma: f64) -> f64 {
        compensated_sum(
            self.weights
                .iter()
                .zip(w.iter().zip(dw))
                .map(|(s, (v, d))| s * (v + gamma * d).max(0.0).powf(self.q)),
        )
    }

    /// Exact line search on `[0, max]` by bisection on the slope, then one
    /// secant step inside the final bracket. Bisection continues past `steps`
    /// while the bracket still starts at zero, so tiny optimal steps survive.
    fn line_search(&self, w: &[f64], dw: &[f64], max: f64, steps: usize) -> f64 {
        if self.slope(w, dw, max) >= 0.0 {
            return max;
        }
        let (mut lo, mut hi) = (0.0, max);
        let mut taken = 0;
        // past the nominal budget, keep halving while no positive step is known
        while taken < steps || (lo == 0.0 && taken < steps + 900 && hi > f64::MIN_POSITIVE) {
            let mid = 0.5 * (lo + hi);
            if self.slope(w, dw, mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            taken += 1;
        }
        let (s_lo, s_hi) = (self.slope(w, dw, lo), self.slope(w, dw, hi));
        if s_lo > s_hi {
            let secant = lo + s_lo * (hi - lo) / (s_lo - s_hi);
            if self.value_along(w, dw, secant) >= self.value_along(w, dw, lo) {
                return secant;
            }
        }
        lo
    }
}

/// `kappa(E)` from a uniform start.
pub fn embedding_constant(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    set_e: &IndexSet,
    options: &EmbeddingOptions,
) -> Result<EmbeddingCertificate> {
    embedding_constant_from(kernel, sigma, q, set_e, options, None)
}

/// `kappa(E)` starting from `start` (any probability vector) when given.
pub fn embedding_constant_from(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    set_e: &IndexSet,
    options: &EmbeddingOptions,
    start: Option<&[f64]>,
) -> Result<EmbeddingCertificate> {
    let n = kernel.n();
    if sigma.len() != n {
        return Err(Error::LengthMismatch {
            what: "sigma",
            expected: n,
            found: sigma.len(),
        });
    }
    set_e.check_bounds(n)?;
    let rows: Vec<usize> = set_e.iter().filter(|&y| sigma.weights()[y] > 0.0).collect();
    if rows.is_empty() {
        return Ok(EmbeddingCertificate::trivial(set_e.clone(), n));
    }
    let objective = Objective {
        kernel,
        weights: rows.iter().map(|&y| sigma.weights()[y]).collect(),
        rows,
        q: q.get(),
    };

    let mut nu = match start {
        Some(s) if s.len() == n => {
            let total: f64 = s.iter().map(|v| v.max(0.0)).sum();
            if total > 0.0 {
                s.iter().map(|v| v.max(0.0) / total).collect()
            } else {
                vec![1.0 / n as f64; n]
            }
        }
        _ => vec![1.0 / n as f64; n],
    };
    let mut w = objective.potential(&nu);
    let mut phi = objective.value(&w);
    let mut iterations = 0;

    while iterations < options.max_iter {
        let grad = objective.gradient(&w);
        let inner = crate::numeric::dot(&grad, &nu);
        let (toward, g_max) = argmax(&grad);
        let gap = (g_max - inner).max(0.0);
        if gap <= options.threshold(phi) {
            break;
        }
        iterations += 1;

        // away vertex: worst gradient among the support of nu
        let (away, g_min) = (0..n)
            .filter(|&z| nu[z] > 0.0)
            .map(|z| (z, grad[z]))
            .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        let use_away = away != usize::MAX && nu[away] < 1.0 && inner - g_min > g_max - inner;

        let (vertex, sign, max_step) = if use_away {
            let share = nu[away];
            (away, -1.0, share / (1.0 - share))
        } else {
            (toward, 1.0, 1.0)
        };
        // d = sign (e_vertex - nu)
        let dw: Vec<f64> = objective
            .rows
            .iter()
            .zip(&w)
            .map(|(&y, wy)| sign * (kernel.get(y, vertex) - wy))
            .collect();
        let gamma = objective.line_search(&w, &dw, max_step, options.line_search_steps);
        if gamma <= 0.0 {
            // no ascent available at numerical precision
            break;
        }
        for (z, v) in nu.iter_mut().enumerate() {
            let e = if z == vertex { 1.0 } else { 0.0 };
            *v += gamma * sign * (e - *v);
            if *v < 1e-300 {
                *v = 0.0;
            }
        }
        if use_away && gamma >= max_step * (1.0 - 1e-15) {
            nu[vertex] = 0.0;
        }
        if iterations % 64 == 0 {
            let total: f64 = compensated_sum(nu.iter().copied());
            nu.iter_mut().for_each(|v| *v /= total);
            w = objective.potential(&nu);
        } else {
            w.iter_mut().zip(&dw).for_each(|(v, d)| *v += gamma * d);
        }
        let next = objective.value(&w);
        if next < phi - 1e-15 * phi.abs() {
            w = objective.potential(&nu);
        }
        phi = objective.value(&w);
    }

    let total: f64 = compensated_sum(nu.iter().copied());
    nu.iter_mut().for_each(|v| *v /= total);
    let w = objective.potential(&nu);
    phi = objective.value(&w);
    let grad = objective.gradient(&w);
    let gap = (argmax(&grad).1 - crate::numeric::dot(&grad, &nu)).max(0.0);
    let cert = EmbeddingCertificate {
        set_e: set_e.clone(),
        value: phi.powf(1.0 / q.get()),
        phi,
        maximizer: nu,
        gap,
        iterations,
    };
    if gap > options.threshold(phi) * 10.0 {
        return Err(Error::NoConvergence(Box::new(cert)));
    }
    Ok(cert)
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> Exponent {
        Exponent::new(v).unwrap()
    }

    #[test]
    fn one_point_closed_form() {
        let k = Kernel::from_rows(vec![vec![2.0]]).unwrap();
        let s = Measure::new(vec![0.5]).unwrap();
        let c = embedding_constant(&k, &s, q(0.5), &IndexSet::all(1), &Default::default()).unwrap();
        assert!((c.value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn two_point_examples() {
        let k = Kernel::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = Measure::new(vec![1.0, 1.0]).unwrap();
        let all = embedding_constant(&k, &s, q(0.5), &IndexSet::all(2), &Default::default()).unwrap();
        assert!((all.value - 6.0).abs() < 1e-9, "{}", all.value);
        let single =
            embedding_constant(&k, &s, q(0.5), &IndexSet::new(vec![0]), &Default::default()).unwrap();
        assert!((single.value - 2.0).abs() < 1e-9, "{}", single.value);
        assert!((single.maximizer[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn massless_set_is_zero() {
        let k = Kernel::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let s = Measure::new(vec![1.0, 0.0]).unwrap();
        let c = embedding_constant(&k, &s, q(0.5), &IndexSet::new(vec![1]), &Default::default())
            .unwrap();
        assert_eq!(c.value, 0.0);
        let c = embedding_constant(&k, &s, q(0.5), &IndexSet::empty(), &Default::default()).unwrap();
        assert_eq!(c.value, 0.0);
    }

    #[test]
    fn gap_matches_linearized_gain() {
        let k = Kernel::from_rows(vec![
            vec![3.0, 1.0, 0.5],
            vec![1.0, 2.0, 0.7],
            vec![0.5, 0.7, 1.5],
        ])
        .unwrap();
        let s = Measure::new(vec![0.3, 1.2, 0.8]).unwrap();
        let c = embedding_constant(&k, &s, q(0.3), &IndexSet::all(3), &Default::default()).unwrap();
        let sum: f64 = c.maximizer.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let obj = Objective {
            kernel: &k,
            rows: vec![0, 1, 2],
            weights: vec![0.3, 1.2, 0.8],
            q: 0.3,
        };
        let w = obj.potential(&c.maximizer);
        let g = obj.gradient(&w);
        let gain = argmax(&g).1 - crate::numeric::dot(&g, &c.maximizer);
        assert!((gain.max(0.0) - c.gap).abs() < 1e-12);
    }
}
