//! Wiener capacity `cap(K)` and its everywhere-constrained variant `cap0(K)`.
//!
//! `cap0(K) = max mu(K)` over `mu` on `K` with `G* mu <= 1` on all of the
//! space. `cap(K)` only asks `G* mu <= 1` on the support of `mu`, so it is
//! the maximum over supports `S` of the LP constrained on `S`. The weak
//! maximum principle gives `cap0 <= cap <= b cap0`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lp::{DenseLp, LpStatus};
use crate::space::IndexSet;

pub const DEFAULT_SUBSET_LIMIT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityMode {
    Exact,
    Bracket,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumMeasure {
    pub value: f64,
    /// Weights over all points (zero off the set).
    pub weights: Vec<f64>,
    pub dual_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CapacityValue {
    Exact { value: f64 },
    Bracket { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityResult {
    pub set_k: IndexSet,
    pub mode: CapacityMode,
    pub cap0: EquilibriumMeasure,
    pub cap: CapacityValue,
    /// Maximizer for the exact value (the `cap0` maximizer in bracket mode).
    pub equilibrium: Vec<f64>,
    /// `2 kappa` when the kernel is symmetric.
    pub wmp_bound: Option<f64>,
    /// `cap0 <= cap <= b cap0` (exact mode, symmetric kernels).
    pub sandwich: Option<bool>,
}

fn restricted_program(kernel: &Kernel, vars: &[usize], rows: &[usize]) -> Result<EquilibriumMeasure> {
    // (G* mu)(x) = sum_y G(y, x) mu_y
    let a: Vec<f64> = rows
        .iter()
        .flat_map(|&x| vars.iter().map(move |&y| kernel.get(y, x)))
        .collect();
    let sol = DenseLp::new(a, vec![1.0; rows.len()], vec![1.0; vars.len()])?.solve()?;
    if sol.status == LpStatus::Unbounded {
        return Err(Error::InvalidInput("unbounded capacity program".into()));
    }
    let mut weights = vec![0.0; kernel.n()];
    for (i, &y) in vars.iter().enumerate() {
        weights[y] = sol.x[i];
    }
    Ok(EquilibriumMeasure {
        value: sol.objective,
        dual_gap: sol.duality_gap(),
        weights,
    })
}

fn check_set(kernel: &Kernel, set_k: &IndexSet) -> Result<()> {
    if set_k.is_empty() {
        return Err(Error::EmptySet);
    }
    set_k.check_bounds(kernel.n())
}

/// `cap0(K)` with its maximizing measure.
pub fn capacity0(kernel: &Kernel, set_k: &IndexSet) -> Result<EquilibriumMeasure> {
    check_set(kernel, set_k)?;
    let rows: Vec<usize> = (0..kernel.n()).collect();
    restricted_program(kernel, set_k.as_slice(), &rows)
}

pub fn wiener_capacity(
    kernel: &Kernel,
    set_k: &IndexSet,
    mode: CapacityMode,
    subset_limit: usize,
) -> Result<CapacityResult> {
    check_set(kernel, set_k)?;
    let cap0 = capacity0(kernel, set_k)?;
    let wmp_bound = kernel.quasi_metric().ok().map(|qm| 2.0 * qm.effective());
    match mode {
        CapacityMode::Bracket => {
            kernel.require_symmetric()?;
            let b = wmp_bound.expect("symmetric kernels have a quasi-metric constant");
            Ok(CapacityResult {
                set_k: set_k.clone(),
                mode,
                cap: CapacityValue::Bracket {
                    lower: cap0.value,
                    upper: b * cap0.value,
                },
                equilibrium: cap0.weights.clone(),
                cap0,
                wmp_bound,
                sandwich: None,
            })
        }
        CapacityMode::Exact => {
            let k = set_k.len();
            if k > subset_limit || k >= 64 {
                return Err(Error::SubsetLimitExceeded {
                    size: k,
                    limit: subset_limit,
                });
            }
            let members = set_k.as_slice();
            let best = (1u64..(1u64 << k))
                .into_par_iter()
                .map(|mask| {
                    let s: Vec<usize> = (0..k)
                        .filter(|&i| mask >> i & 1 == 1)
                        .map(|i| members[i])
                        .collect();
                    restricted_program(kernel, &s, &s).map(|e| (mask, e))
                })
                .try_reduce_with(|a, b| {
                    let pick_b = b.1.value > a.1.value || (b.1.value == a.1.value && b.0 < a.0);
                    Ok(if pick_b { b } else { a })
                })
                .expect("nonempty set has at least one support")?;
            let value = best.1.value;
            let sandwich = wmp_bound.map(|b| {
                let tol = 1e-9 * (1.0 + value.abs());
                cap0.value <= value + tol && value <= b * cap0.value + tol
            });
            Ok(CapacityResult {
                set_k: set_k.clone(),
                mode,
                cap0,
                cap: CapacityValue::Exact { value },
                equilibrium: best.1.weights,
                wmp_bound,
                sandwich,
            })
        }
    }
}

impl CapacityResult {
    /// Exact value, or the lower end of the bracket.
    pub fn value(&self) -> f64 {
        match self.cap {
            CapacityValue::Exact { value } => value,
            CapacityValue::Bracket { lower, .. } => lower,
        }
    }
}
