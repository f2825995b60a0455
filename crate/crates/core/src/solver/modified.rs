//! Solving through a modified kernel.
//!
//! With `v = u / m`, `sigma~ = m^{1+q} sigma` and `G~ = G / (m (x) m)`,
//! the equation `u = G(u^q sigma) + G mu` becomes
//! `v = G~(v^q sigma~) + G~(m mu)`, and `u = f` data becomes `f / m`.

use serde::Serialize;

use super::{
    bilateral_bounds, compare_bounds, residual, solve, BilateralReport, Forcing, Problem,
    SolveOptions, SolveResult, SolveStatus,
};
use crate::error::{Error, Result};
use crate::kernels::{modifiability_certificate, modify};
use crate::potentials::modified_sigma;
use crate::space::Measure;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifiedSolution {
    /// Solution in the original variables, with constants of `kappa~`.
    pub result: SolveResult,
    /// Transformed solution `v = u / m`.
    pub v: Vec<f64>,
    /// Bounds in the original variables; `None` unless converged.
    pub bilateral: Option<BilateralReport>,
    pub kappa_modified: f64,
}

/// Transformed problem on `(G~, sigma~)`.
pub fn transformed_problem(problem: &Problem) -> Result<Problem> {
    let modifier = problem
        .modifier()
        .ok_or_else(|| Error::InvalidInput("problem has no modifier".into()))?;
    let m = modifier.values();
    let kernel = modify(problem.kernel(), modifier)?;
    if !kernel.is_symmetric() {
        return Err(Error::NotQuasiMetricModified(
            "modified kernel is not symmetric".into(),
        ));
    }
    if let Some(pole) = modifier.pole() {
        let cert = modifiability_certificate(problem.kernel(), pole)?;
        if !cert.pass {
            return Err(Error::NotQuasiMetricModified(format!(
                "kappa~ = {} exceeds 4 kappa^2 = {}",
                cert.kappa_modified, cert.bound
            )));
        }
    }
    let sigma = modified_sigma(modifier, problem.sigma(), problem.q())?;
    let forcing = match problem.forcing() {
        Forcing::None => Forcing::None,
        Forcing::Mu(mu) => Forcing::Mu(Measure::new(
            mu.weights().iter().zip(m).map(|(w, mx)| w * mx).collect(),
        )?),
        Forcing::F(f) => Forcing::F(f.iter().zip(m).map(|(fx, mx)| fx / mx).collect()),
    };
    Problem::new(kernel, sigma, problem.q().get(), forcing)
}

pub fn solve_modified(problem: &Problem, options: &SolveOptions) -> Result<ModifiedSolution> {
    let transformed = transformed_problem(problem)?;
    let m = problem.modifier().expect("checked above").values().to_vec();
    let inner = solve(&transformed, options)?;
    let kappa_modified = inner.constants.kappa;
    let u: Vec<f64> = inner.u.iter().zip(&m).map(|(v, mx)| v * mx).collect();
    let f = problem.forcing_vector();
    let original_residual = if inner.status == SolveStatus::Converged {
        residual(problem, &u, &f)
    } else {
        f64::INFINITY
    };
    let bilateral = if inner.status == SolveStatus::Converged {
        let profile = transformed.profile(&options.embedding)?;
        let bounds = bilateral_bounds(&transformed, &profile, &inner.constants);
        Some(compare_bounds(problem.sigma(), &u, bounds.scaled(&m), inner.constants))
    } else {
        None
    };
    Ok(ModifiedSolution {
        v: inner.u.clone(),
        result: SolveResult {
            u,
            residual: original_residual,
            ..inner
        },
        bilateral,
        kappa_modified,
    })
}
