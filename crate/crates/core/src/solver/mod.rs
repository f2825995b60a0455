//! Monotone iteration for `u = G(u^q sigma) + f` and the checks built on it.
//!
//! The forcing is either `f = G mu` for a measure `mu` or an arbitrary
//! nonnegative vector. Iteration starts from an explicit subsolution and is
//! nondecreasing; the limit is the unique nontrivial solution.

mod checks;
mod modified;

use std::sync::Arc;

use serde::Serialize;

pub use checks::{
    composite_constant, existence_check, kappa_lower_check, superinvariance_constant,
    uniqueness_probe, ExistenceReport, KappaLowerReport, ModifiedExistence, TailIntegrals,
    UniquenessReport,
};
pub use modified::{solve_modified, transformed_problem, ModifiedSolution};

use crate::error::{Error, Result};
use crate::kernels::{Kernel, Modifier};
use crate::numeric::{rel_sup_diff, sup_norm, Exponent};
use crate::potentials::{potential, potential_profile, EmbeddingOptions, KappaCache, PotentialProfile};
use crate::space::Measure;

#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    None,
    /// `f = G mu`.
    Mu(Measure),
    /// Arbitrary nonnegative data.
    F(Vec<f64>),
}

impl Forcing {
    pub fn is_vector(&self) -> bool {
        matches!(self, Forcing::F(_))
    }
}

/// The equation data. Owns a cache of embedding constants, which depend
/// only on kernel, sigma and q.
#[derive(Debug, Clone)]
pub struct Problem {
    kernel: Kernel,
    sigma: Measure,
    q: Exponent,
    forcing: Forcing,
    modifier: Option<Modifier>,
    cache: Arc<KappaCache>,
}

impl Problem {
    pub fn new(kernel: Kernel, sigma: Measure, q: f64, forcing: Forcing) -> Result<Self> {
        let q = Exponent::new(q)?;
        kernel.require_symmetric()?;
        let n = kernel.n();
        if sigma.len() != n {
            return Err(Error::LengthMismatch {
                what: "sigma",
                expected: n,
                found: sigma.len(),
            });
        }
        if !(sigma.total() > 0.0) {
            return Err(Error::ZeroSigma);
        }
        match &forcing {
            Forcing::None => {}
            Forcing::Mu(mu) if mu.len() != n => {
                return Err(Error::LengthMismatch {
                    what: "mu",
                    expected: n,
                    found: mu.len(),
                })
            }
            Forcing::F(f) => {
                if f.len() != n {
                    return Err(Error::LengthMismatch {
                        what: "f",
                        expected: n,
                        found: f.len(),
                    });
                }
                if let Some((index, &value)) =
                    f.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0))
                {
                    return Err(Error::BadWeight {
                        what: "f",
                        index,
                        value,
                    });
                }
            }
            Forcing::Mu(_) => {}
        }
        Ok(Self {
            kernel,
            sigma,
            q,
            forcing,
            modifier: None,
            cache: Arc::new(KappaCache::new()),
        })
    }

    pub fn with_modifier(mut self, modifier: Modifier) -> Result<Self> {
        if modifier.values().len() != self.kernel.n() {
            return Err(Error::LengthMismatch {
                what: "modifier",
                expected: self.kernel.n(),
                found: modifier.values().len(),
            });
        }
        self.modifier = Some(modifier);
        Ok(self)
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn sigma(&self) -> &Measure {
        &self.sigma
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn modifier(&self) -> Option<&Modifier> {
        self.modifier.as_ref()
    }

    pub fn cache(&self) -> &KappaCache {
        &self.cache
    }

    pub fn n(&self) -> usize {
        self.kernel.n()
    }

    /// The same data with a different forcing (sharing the cache).
    pub fn with_forcing(&self, forcing: Forcing) -> Result<Self> {
        let mut p = Problem::new(self.kernel.clone(), self.sigma.clone(), self.q.get(), forcing)?;
        p.cache = Arc::clone(&self.cache);
        p.modifier = self.modifier.clone();
        Ok(p)
    }

    /// The forcing vector `f` (`G mu` in measure mode, zero when absent).
    pub fn forcing_vector(&self) -> Vec<f64> {
        match &self.forcing {
            Forcing::None => vec![0.0; self.n()],
            Forcing::Mu(mu) => potential(&self.kernel, mu),
            Forcing::F(f) => f.clone(),
        }
    }

    /// `G(u^q sigma)`.
    pub fn nonlinear_part(&self, u: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = u
            .iter()
            .zip(self.sigma.weights())
            .map(|(v, s)| if *s > 0.0 { s * self.q.pow_q(v.max(0.0)) } else { 0.0 })
            .collect();
        self.kernel.apply(&w)
    }

    /// `T(u) = G(u^q sigma) + f`.
    pub fn operator(&self, u: &[f64], f: &[f64]) -> Vec<f64> {
        let mut out = self.nonlinear_part(u);
        out.iter_mut().zip(f).for_each(|(a, b)| *a += b);
        out
    }

    /// `G(f^q sigma)` in vector mode, `None` otherwise.
    pub fn forcing_feedback(&self) -> Option<Vec<f64>> {
        match &self.forcing {
            Forcing::F(f) => Some(self.nonlinear_part(f)),
            _ => None,
        }
    }

    pub fn constants(&self) -> Result<Constants> {
        let qm = self.kernel.quasi_metric()?;
        Ok(Constants::new(qm.kappa, self.q))
    }

    /// Potentials `G sigma`, `K sigma`, `G mu` and `h` through the cache.
    pub fn profile(&self, options: &EmbeddingOptions) -> Result<PotentialProfile> {
        let mu = match &self.forcing {
            Forcing::Mu(mu) => Some(mu),
            _ => None,
        };
        potential_profile(&self.kernel, &self.sigma, mu, self.q, options, &self.cache)
    }
}

/// Constants of the bilateral estimates for a kernel with quasi-metric
/// constant `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub q: f64,
    pub kappa: f64,
    /// `max(kappa, 1/2)`.
    pub kappa_eff: f64,
    /// WMP constant `2 kappa_eff`.
    pub wmp: f64,
    /// `(1-q)^{1/(1-q)} (2 kappa)^{-q/(1-q)}`.
    pub lower: f64,
    /// `(8 kappa)^{q/(1-q)}`.
    pub upper: f64,
    /// Lower constant in vector-forcing mode, `min(lower / 2, 2^{q-1})`.
    pub lower_vector: f64,
    /// Seed scale `[(1-q) b^{-q/(1-q)}]^{1/(1-q)}`.
    pub seed: f64,
}

impl Constants {
    pub fn new(kappa: f64, q: Exponent) -> Self {
        let qv = q.get();
        let kappa_eff = kappa.max(0.5);
        let wmp = 2.0 * kappa_eff;
        let lower = q.pow_dual(1.0 - qv) * q.pow_ratio(wmp).recip();
        let upper = q.pow_ratio(8.0 * kappa_eff);
        let seed = q.pow_dual((1.0 - qv) / q.pow_ratio(wmp));
        Self {
            q: qv,
            kappa,
            kappa_eff,
            wmp,
            lower,
            upper,
            lower_vector: (lower / 2.0).min(2f64.powf(qv - 1.0)),
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Entries above this are treated as blow-up.
    pub divergence: f64,
    pub embedding: EmbeddingOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            divergence: 1e100,
            embedding: EmbeddingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Iterates blew up.
    Diverged,
    /// The data potentials themselves are infinite at working precision.
    NonexistenceDetected,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Diverged => "diverged",
            SolveStatus::NonexistenceDetected => "nonexistence_detected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `sup |u - T(u)|`.
    pub residual: f64,
    /// Relative sup-norm change per step.
    pub trace: Vec<f64>,
    /// Whether every step was entrywise nondecreasing.
    pub monotone: bool,
    pub constants: Constants,
}

fn blown_up(v: &[f64], threshold: f64) -> bool {
    v.iter().any(|x| !x.is_finite() || *x > threshold)
}

/// `u0 = c0 (G sigma)^{1/(1-q)} + c0 G mu`, or `+ f` in vector mode.
/// Fails if the subsolution inequality `u0 <= T(u0)` does not hold.
pub fn subsolution_seed(problem: &Problem) -> Result<Vec<f64>> {
    let constants = problem.constants()?;
    let f = problem.forcing_vector();
    seed_with(problem, &constants, &f)
}

fn seed_with(problem: &Problem, constants: &Constants, f: &[f64]) -> Result<Vec<f64>> {
    let q = problem.q();
    let c0 = constants.seed;
    let g_sigma = potential(problem.kernel(), problem.sigma());
    let forcing_scale = if problem.forcing().is_vector() { 1.0 } else { c0 };
    let u0: Vec<f64> = g_sigma
        .iter()
        .zip(f)
        .map(|(g, fx)| c0 * q.pow_dual(*g) + forcing_scale * fx)
        .collect();
    let image = problem.operator(&u0, f);
    for (point, (&seed, &img)) in u0.iter().zip(&image).enumerate() {
        if seed > img * (1.0 + 1e-12) {
            return Err(Error::SeedNotSubsolution {
                point,
                seed,
                image: img,
            });
        }
    }
    Ok(u0)
}

/// Picard iteration `u_{j+1} = T(u_j)` from the subsolution seed.
pub fn solve(problem: &Problem, options: &SolveOptions) -> Result<SolveResult> {
    let constants = problem.constants()?;
    let f = problem.forcing_vector();
    let g_sigma = potential(problem.kernel(), problem.sigma());
    if blown_up(&g_sigma, options.divergence) || blown_up(&f, options.divergence) {
        return Ok(SolveResult {
            u: g_sigma,
            status: SolveStatus::NonexistenceDetected,
            iterations: 0,
            residual: f64::INFINITY,
            trace: Vec::new(),
            monotone: true,
            constants,
        });
    }
    let u0 = seed_with(problem, &constants, &f)?;
    iterate(problem, u0, &f, constants, options)
}

fn iterate(
    problem: &Problem,
    mut u: Vec<f64>,
    f: &[f64],
    constants: Constants,
    options: &SolveOptions,
) -> Result<SolveResult> {
    let mut trace = Vec::new();
    let mut monotone = true;
    for iteration in 1..=options.max_iter {
        let next = problem.operator(&u, f);
        if blown_up(&next, options.divergence) {
            return Ok(SolveResult {
                u: next,
                status: SolveStatus::Diverged,
                iterations: iteration,
                residual: f64::INFINITY,
                trace,
                monotone,
                constants,
            });
        }
        monotone &= next
            .iter()
            .zip(&u)
            .all(|(a, b)| *a >= b - 1e-13 * b.abs());
        let change = rel_sup_diff(&next, &u);
        trace.push(change);
        u = next;
        if change <= options.tol {
            let residual = residual(problem, &u, f);
            if residual <= options.tol * (1.0 + sup_norm(&u)) {
                return Ok(SolveResult {
                    u,
                    status: SolveStatus::Converged,
                    iterations: iteration,
                    residual,
                    trace,
                    monotone,
                    constants,
                });
            }
        }
    }
    let last_change = trace.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::MaxIterExceeded {
        iterations: options.max_iter,
        last_change,
        trace,
    })
}

/// `sup |u - T(u)|`.
pub fn residual(problem: &Problem, u: &[f64], f: &[f64]) -> f64 {
    let image = problem.operator(u, f);
    u.iter()
        .zip(&image)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilateralReport {
    pub constants: Constants,
    /// `c [(G sigma)^{1/(1-q)} + K sigma] + G mu`.
    pub lower_bound: Vec<f64>,
    pub upper_bound: Vec<f64>,
    /// `c max((G sigma)^{1/(1-q)}, K sigma) + G mu`, which each of the two
    /// separate subsolution arguments gives on its own. Equals `lower_bound` in vector mode.
    pub proven_lower_bound: Vec<f64>,
    /// `u / lower_bound`; at least 1 where the lower estimate holds.
    pub lower_ratio: Vec<f64>,
    /// `u / upper_bound`; at most 1 where the upper estimate holds.
    pub upper_ratio: Vec<f64>,
    pub worst_lower: f64,
    pub worst_upper: f64,
    pub lower_witness: usize,
    pub upper_witness: usize,
    pub lower_pass: bool,
    pub upper_pass: bool,
    pub proven_lower_pass: bool,
    /// `lower_pass && upper_pass`.
    pub pass: bool,
}

/// Relative slack allowed in the pointwise comparisons.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// Pointwise envelopes compared against a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub proven_lower: Vec<f64>,
}

impl Bounds {
    /// Multiplies every envelope by `m` pointwise.
    pub fn scaled(&self, m: &[f64]) -> Bounds {
        let scale = |b: &[f64]| b.iter().zip(m).map(|(x, mx)| x * mx).collect();
        Bounds {
            lower: scale(&self.lower),
            upper: scale(&self.upper),
            proven_lower: scale(&self.proven_lower),
        }
    }
}

/// Lower and upper envelopes of the bilateral estimates.
pub fn bilateral_bounds(problem: &Problem, profile: &PotentialProfile, constants: &Constants) -> Bounds {
    let homogeneous = profile.homogeneous();
    let n = problem.n();
    match problem.forcing() {
        Forcing::F(f) => {
            let feedback = problem.forcing_feedback().expect("vector mode");
            let lower: Vec<f64> = (0..n)
                .map(|x| constants.lower_vector * (homogeneous[x] + feedback[x]) + f[x])
                .collect();
            let upper = (0..n)
                .map(|x| constants.upper * (homogeneous[x] + feedback[x]) + f[x])
                .collect();
            Bounds {
                proven_lower: lower.clone(),
                lower,
                upper,
            }
        }
        _ => {
            let q = problem.q();
            let g_mu = profile.g_mu.clone().unwrap_or_else(|| vec![0.0; n]);
            let lower = (0..n)
                .map(|x| constants.lower * homogeneous[x] + g_mu[x])
                .collect();
            let upper = (0..n)
                .map(|x| constants.upper * (homogeneous[x] + g_mu[x]))
                .collect();
            let proven_lower = (0..n)
                .map(|x| {
                    let linear = q.pow_dual(profile.g_sigma[x]);
                    constants.lower * linear.max(profile.k_sigma[x]) + g_mu[x]
                })
                .collect();
            Bounds {
                lower,
                upper,
                proven_lower,
            }
        }
    }
}

/// Compares `u` with the bilateral estimates at every sigma-mass point.
pub fn verify_bilateral(problem: &Problem, u: &[f64], options: &EmbeddingOptions) -> Result<BilateralReport> {
    let profile = problem.profile(options)?;
    let constants = problem.constants()?;
    Ok(verify_bilateral_with(problem, u, &profile, &constants))
}

pub fn verify_bilateral_with(
    problem: &Problem,
    u: &[f64],
    profile: &PotentialProfile,
    constants: &Constants,
) -> BilateralReport {
    let bounds = bilateral_bounds(problem, profile, constants);
    compare_bounds(problem.sigma(), u, bounds, *constants)
}

/// Checks `u` against precomputed bounds at the points carrying sigma mass.
pub fn compare_bounds(sigma: &Measure, u: &[f64], bounds: Bounds, constants: Constants) -> BilateralReport {
    let Bounds {
        lower: lower_bound,
        upper: upper_bound,
        proven_lower: proven_lower_bound,
    } = bounds;
    let lower_ratio: Vec<f64> = u.iter().zip(&lower_bound).map(|(a, b)| a / b).collect();
    let upper_ratio: Vec<f64> = u.iter().zip(&upper_bound).map(|(a, b)| a / b).collect();
    let mass: Vec<usize> = sigma.support().iter().collect();
    let (lower_witness, worst_lower) = mass
        .iter()
        .map(|&x| (x, lower_ratio[x]))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let (upper_witness, worst_upper) = mass
        .iter()
        .map(|&x| (x, upper_ratio[x]))
        .fold((0, 0.0), |b, c| if c.1 > b.1 { c } else { b });
    let at_least = |bound: &[f64]| mass.iter().all(|&x| u[x] >= bound[x] * (1.0 - BOUND_TOLERANCE));
    let lower_pass = at_least(&lower_bound);
    let proven_lower_pass = at_least(&proven_lower_bound);
    let upper_pass = mass
        .iter()
        .all(|&x| u[x] <= upper_bound[x] * (1.0 + BOUND_TOLERANCE));
    BilateralReport {
        constants,
        lower_bound,
        upper_bound,
        proven_lower_bound,
        lower_ratio,
        upper_ratio,
        worst_lower,
        worst_upper,
        lower_witness,
        upper_witness,
        lower_pass,
        upper_pass,
        proven_lower_pass,
        pass: lower_pass && upper_pass,
    }
}

/// `h` for the problem: `(G sigma)^{1/(1-q)} + K sigma + G mu`, and in
/// vector mode `(G sigma)^{1/(1-q)} + K sigma + G(f^q sigma) + f`.
pub fn h_function(problem: &Problem, profile: &PotentialProfile) -> Vec<f64> {
    match problem.forcing() {
        Forcing::F(f) => {
            let feedback = problem.forcing_feedback().expect("vector mode");
            profile
                .homogeneous()
                .iter()
                .zip(feedback.iter().zip(f))
                .map(|(h0, (g, fx))| h0 + g + fx)
                .collect()
        }
        _ => profile.h.clone(),
    }
}
