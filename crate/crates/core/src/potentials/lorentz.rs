//! Norm diagnostics comparing `kappa(B)` with `f = G sigma_B` on `B`.
//!
//! With `p = q/(1-q)` and `r = q`, the Lebesgue norm is
//! `||f||_p = (sum_y sigma_y f_y^p)^{1/p}` over `B`, and the Lorentz
//! quasi-norm is the rearrangement sum
//!
//! ```text
//! ||f||_{p,r} = [ sum_i f_(i)^r (W_i^{r/p} - W_{i-1}^{r/p}) ]^{1/r}
//! ```
//!
//! where `f_(1) >= f_(2) >= ...` and `W_i` is the sigma-mass of the first
//! `i` points. This is `(r/p) int_0^inf (t^{1/p} f*(t))^r dt/t` raised to
//! `1/r`, normalized so that `||f||_{p,p} = ||f||_p`.

use serde::Serialize;

use super::{embedding_constant, EmbeddingOptions};
use crate::error::Result;
use crate::kernels::Kernel;
use crate::numeric::{compensated_sum, Exponent};
use crate::space::{IndexSet, Measure};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzDiagnostic {
    pub set_b: IndexSet,
    pub kappa: f64,
    pub lebesgue_norm: f64,
    pub lorentz_norm: f64,
    /// `kappa / ||f||_p`; `None` when sigma vanishes on `B`.
    pub lebesgue_ratio: Option<f64>,
    /// `kappa / ||f||_{p,r}`; `None` when sigma vanishes on `B`.
    pub lorentz_ratio: Option<f64>,
}

pub fn lorentz_diagnostic(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    set_b: &IndexSet,
    options: &EmbeddingOptions,
) -> Result<LorentzDiagnostic> {
    let sigma_b = sigma.restrict(set_b);
    let kappa = embedding_constant(kernel, sigma, q, set_b, options)?.value;
    let f = kernel.apply(sigma_b.weights());
    let p = q.ratio();
    let r = q.get();

    let mut atoms: Vec<(f64, f64)> = set_b
        .iter()
        .filter(|&y| sigma_b.weights()[y] > 0.0)
        .map(|y| (f[y], sigma_b.weights()[y]))
        .collect();
    if atoms.is_empty() {
        return Ok(LorentzDiagnostic {
            set_b: set_b.clone(),
            kappa,
            lebesgue_norm: 0.0,
            lorentz_norm: 0.0,
            lebesgue_ratio: None,
            lorentz_ratio: None,
        });
    }
    let lebesgue = compensated_sum(atoms.iter().map(|(v, w)| w * v.powf(p))).powf(1.0 / p);

    atoms.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cumulative = 0.0;
    let lorentz = compensated_sum(atoms.iter().map(|(v, w)| {
        let before = cumulative;
        cumulative += w;
        v.powf(r) * (cumulative.powf(r / p) - before.powf(r / p))
    }))
    .powf(1.0 / r);

    Ok(LorentzDiagnostic {
        set_b: set_b.clone(),
        kappa,
        lebesgue_norm: lebesgue,
        lorentz_norm: lorentz,
        lebesgue_ratio: Some(kappa / lebesgue),
        lorentz_ratio: Some(kappa / lorentz),
    })
}
