//! Uniqueness probe, existence report and the isolated lower-bound checks.

use serde::Serialize;

use super::{
    blown_up, h_function, seed_with, Constants, Forcing, Problem, SolveOptions, SolveStatus,
};
use crate::error::{Error, Result};
use crate::kernels::{modify, Modifier};
use crate::numeric::{compensated_sum, Exponent};
use crate::potentials::{
    cached_embedding_constant, embedding_constant, modified_sigma, potential, EmbeddingOptions,
    PotentialProfile,
};
use crate::space::{ball_decomposition, IndexSet};

/// Explicit constant in `G(h^q sigma) <= C h` for a quasi-metric kernel:
///
/// `C = c_q^q [2 kappa (2/c)^q + (2 kappa)^{q/(1-q)}] + (4 kappa)^q`
///
/// with `c_q = 2^{q/(1-q)}` and `c` the lower bilateral constant.
pub fn composite_constant(q: Exponent, kappa: f64) -> f64 {
    let qv = q.get();
    let constants = Constants::new(kappa, q);
    let k = constants.kappa_eff;
    let split = q.pow_ratio(2.0);
    split.powf(qv) * (2.0 * k * (2.0 / constants.lower).powf(qv) + q.pow_ratio(2.0 * k))
        + (4.0 * k).powf(qv)
}

/// Measured `max_x G(h^q sigma)(x) / h(x)`.
pub fn superinvariance_constant(problem: &Problem, h: &[f64]) -> f64 {
    let image = problem.nonlinear_part(h);
    image
        .iter()
        .zip(h)
        .filter(|(_, hx)| **hx > 0.0)
        .map(|(g, hx)| g / hx)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// `ln max_x v_j(x) / u_j(x)` for the downward `v` and upward `u`.
    pub log_gaps: Vec<f64>,
    pub upward: Vec<f64>,
    pub downward: Vec<f64>,
    /// Relative sup-norm difference between the two limits.
    pub max_rel_diff: f64,
    /// Measured superinvariance constant of `h`.
    pub c_h: f64,
    /// Scale of the downward start `C' h`.
    pub c_prime: f64,
    /// `c / C`.
    pub contraction_base: f64,
    /// `min(c / C, 1 / A_3)`, the base of the checked envelope.
    pub envelope_base: f64,
    pub envelope_violations: usize,
    /// Whether `u_j <= v_j` held at every step.
    pub ordered: bool,
    pub agree: bool,
}

const ENVELOPE_START: usize = 3;
const STAGNATION_WINDOW: usize = 50;

/// Runs the upward iteration from the seed and the downward iteration from
/// the supersolution `C' h` side by side, tracking `A_j = max v_j / u_j`.
///
/// Since `v_j <= A u_j` gives `T(v_j) <= A^q T(u_j)`, the gap obeys
/// `ln A_{j+1} <= q ln A_j`; from `j = 3` on it is checked against
/// `q^{j-3} ln(1/a)` with `a = min(c/C, 1/A_3)`.
pub fn uniqueness_probe(problem: &Problem, options: &SolveOptions) -> Result<UniquenessReport> {
    let constants = problem.constants()?;
    let q = problem.q();
    let f = problem.forcing_vector();
    let g_sigma = potential(problem.kernel(), problem.sigma());
    let contraction_base = constants.lower / constants.upper;
    let empty = |status| UniquenessReport {
        status,
        iterations: 0,
        log_gaps: Vec::new(),
        upward: Vec::new(),
        downward: Vec::new(),
        max_rel_diff: f64::INFINITY,
        c_h: f64::NAN,
        c_prime: f64::NAN,
        contraction_base,
        envelope_base: contraction_base,
        envelope_violations: 0,
        ordered: true,
        agree: false,
    };
    if blown_up(&g_sigma, options.divergence) || blown_up(&f, options.divergence) {
        return Ok(empty(SolveStatus::NonexistenceDetected));
    }

    let profile = problem.profile(&options.embedding)?;
    let h = h_function(problem, &profile);
    let c_h = superinvariance_constant(problem, &h);
    // C'^q C_h + 1 <= C' makes C' h a supersolution
    let c_prime = 2f64.max(q.pow_dual(2.0 * c_h));
    let mut u = seed_with(problem, &constants, &f)?;
    let mut v: Vec<f64> = h.iter().map(|x| c_prime * x).collect();

    let mut log_gaps = Vec::new();
    let mut ordered = true;
    let mut envelope_base = contraction_base;
    let mut envelope_violations = 0;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut status = SolveStatus::Converged;
    let mut iterations = 0;
    loop {
        let gap = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (b / a).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        ordered &= u.iter().zip(&v).all(|(a, b)| *b >= a * (1.0 - 1e-12));
        let j = log_gaps.len();
        if j == ENVELOPE_START {
            envelope_base = contraction_base.min((-gap).exp());
        }
        if j >= ENVELOPE_START {
            let envelope = q.get().powi((j - ENVELOPE_START) as i32) * (-envelope_base.ln());
            if gap > envelope + 1e-12 {
                envelope_violations += 1;
            }
        }
        log_gaps.push(gap);
        if gap <= options.tol {
            break;
        }
        if gap < best * (1.0 - 1e-3) {
            best = gap;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > STAGNATION_WINDOW {
                return Err(Error::GapStagnation { iterations, gap });
            }
        }
        if iterations >= options.max_iter {
            return Err(Error::GapStagnation { iterations, gap });
        }
        u = problem.operator(&u, &f);
        v = problem.operator(&v, &f);
        iterations += 1;
        if blown_up(&u, options.divergence) || blown_up(&v, options.divergence) {
            status = SolveStatus::Diverged;
            break;
        }
    }
    let max_rel_diff = crate::numeric::rel_sup_diff(&v, &u);
    Ok(UniquenessReport {
        status,
        iterations,
        log_gaps,
        agree: status == SolveStatus::Converged && max_rel_diff <= 10.0 * options.tol,
        upward: u,
        downward: v,
        max_rel_diff,
        c_h,
        c_prime,
        contraction_base,
        envelope_base,
        envelope_violations,
        ordered,
    })
}

/// Check of `kappa(B) <= b / (1-q)^{1/q} ||w||^{1-q}_{L^q(sigma_B)}` over
/// every ball of every center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaLowerReport {
    /// Largest `kappa(B) / bound`.
    pub worst_ratio: f64,
    pub witness_center: usize,
    pub witness_radius: f64,
    pub balls_checked: usize,
    pub pass: bool,
}

pub fn kappa_lower_check(
    problem: &Problem,
    w: &[f64],
    options: &EmbeddingOptions,
) -> Result<KappaLowerReport> {
    let constants = problem.constants()?;
    let q = problem.q();
    let qv = q.get();
    let sigma = problem.sigma().weights();
    let scale = constants.wmp / (1.0 - qv).powf(1.0 / qv);
    let mut worst = (0.0, 0, 0.0);
    let mut balls = 0;
    for x in 0..problem.n() {
        let dec = ball_decomposition(problem.kernel(), x);
        for (b, &g) in dec.sets().iter().zip(dec.levels()) {
            let mass = compensated_sum(b.iter().map(|y| sigma[y] * q.pow_q(w[y])));
            if mass <= 0.0 {
                continue;
            }
            balls += 1;
            let kappa = cached_embedding_constant(
                problem.kernel(),
                problem.sigma(),
                q,
                b,
                options,
                problem.cache(),
            )?
            .value;
            // ||w||_{L^q}^{1-q} = mass^{(1-q)/q}
            let bound = scale * mass.powf((1.0 - qv) / qv);
            let ratio = kappa / bound;
            if ratio > worst.0 {
                worst = (ratio, x, 1.0 / g);
            }
        }
    }
    Ok(KappaLowerReport {
        worst_ratio: worst.0,
        witness_center: worst.1,
        witness_radius: worst.2,
        balls_checked: balls,
        pass: worst.0 <= 1.0 + 1e-9,
    })
}

/// Tail integrals `int_a^inf F(B(x0, r)) / r^2 dr`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailIntegrals {
    pub x0: usize,
    pub a: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModifiedExistence {
    /// `kappa~(Omega)` for `G / (m (x) m)` and `m^{1+q} sigma`.
    pub kappa_omega: f64,
    /// `int m d mu`.
    pub modifier_mass: f64,
    pub exists: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExistenceReport {
    pub g_sigma_finite: bool,
    pub k_sigma_finite: bool,
    pub g_mu_finite: bool,
    /// Vector mode only: finiteness of `f` and `G(f^q sigma)`.
    pub forcing_finite: Option<bool>,
    pub tails: TailIntegrals,
    pub modified: Option<ModifiedExistence>,
    pub exists: bool,
}

fn finite(v: &[f64], threshold: f64) -> bool {
    !blown_up(v, threshold)
}

/// Finite-space rendering of the existence criteria.
pub fn existence_check(
    problem: &Problem,
    x0: usize,
    a: f64,
    options: &SolveOptions,
) -> Result<ExistenceReport> {
    let n = problem.n();
    if x0 >= n {
        return Err(Error::IndexOutOfRange { index: x0, n });
    }
    if !(a > 0.0) {
        return Err(Error::InvalidInput(format!("tail radius a = {a} must be positive")));
    }
    let q = problem.q();
    let profile: PotentialProfile = problem.profile(&options.embedding)?;
    let threshold = options.divergence;
    let g_sigma_finite = finite(&profile.g_sigma, threshold);
    let k_sigma_finite = finite(&profile.k_sigma, threshold);
    let g_mu_finite = profile.g_mu.as_ref().is_none_or(|g| finite(g, threshold));
    let forcing_finite = match problem.forcing() {
        Forcing::F(f) => {
            let feedback = problem.forcing_feedback().expect("vector mode");
            Some(finite(f, threshold) && finite(&feedback, threshold))
        }
        _ => None,
    };

    let dec = ball_decomposition(problem.kernel(), x0);
    let sigma_levels: Vec<f64> = dec.sets().iter().map(|b| problem.sigma().mass_of(b)).collect();
    let kappa_levels: Vec<f64> = dec
        .sets()
        .iter()
        .map(|b| {
            cached_embedding_constant(
                problem.kernel(),
                problem.sigma(),
                q,
                b,
                &options.embedding,
                problem.cache(),
            )
            .map(|c| q.pow_ratio(c.value))
        })
        .collect::<Result<_>>()?;
    let mu_tail = match problem.forcing() {
        Forcing::Mu(mu) => {
            let levels: Vec<f64> = dec.sets().iter().map(|b| mu.mass_of(b)).collect();
            Some(dec.radial_tail(&levels, a))
        }
        _ => None,
    };
    let tails = TailIntegrals {
        x0,
        a,
        sigma: dec.radial_tail(&sigma_levels, a),
        kappa: dec.radial_tail(&kappa_levels, a),
        mu: mu_tail,
    };

    let modified = match problem.modifier() {
        Some(m) => Some(modified_existence(problem, m, &options.embedding)?),
        None => None,
    };
    let exists = g_sigma_finite
        && k_sigma_finite
        && g_mu_finite
        && forcing_finite.unwrap_or(true)
        && modified.as_ref().is_none_or(|m| m.exists);
    Ok(ExistenceReport {
        g_sigma_finite,
        k_sigma_finite,
        g_mu_finite,
        forcing_finite,
        tails,
        modified,
        exists,
    })
}

fn modified_existence(
    problem: &Problem,
    modifier: &Modifier,
    options: &EmbeddingOptions,
) -> Result<ModifiedExistence> {
    let kernel = modify(problem.kernel(), modifier)?;
    let sigma = modified_sigma(modifier, problem.sigma(), problem.q())?;
    let kappa_omega =
        embedding_constant(&kernel, &sigma, problem.q(), &IndexSet::all(problem.n()), options)?
            .value;
    let modifier_mass = match problem.forcing() {
        Forcing::Mu(mu) => compensated_sum(
            mu.weights()
                .iter()
                .zip(modifier.values())
                .map(|(w, m)| w * m),
        ),
        _ => 0.0,
    };
    Ok(ModifiedExistence {
        kappa_omega,
        modifier_mass,
        exists: kappa_omega.is_finite() && modifier_mass.is_finite(),
    })
}
