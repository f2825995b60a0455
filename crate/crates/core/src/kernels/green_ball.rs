//! Green kernel of the fractional Laplacian `(-Delta)^{alpha/2}` on the unit
//! ball of `R^n`, `0 < alpha < n`, in Boggio's closed form:
//!
//! ```text
//! G(x, y) = k(n, alpha) |x - y|^{alpha - n} int_0^{r0} t^{alpha/2 - 1} (t + 1)^{-n/2} dt
//! r0      = (1 - |x|^2)(1 - |y|^2) / |x - y|^2
//! k(n, a) = Gamma(n/2) / (2^a pi^{n/2} Gamma(a/2)^2)
//! ```
//!
//! With `s = t / (1 + t)` the integral is the incomplete beta function
//! `B(s0; alpha/2, (n - alpha)/2)` at `s0 = r0 / (1 + r0)`.
//! For `alpha = 2, n = 3` this reduces to the Newtonian Green function
//! `(1/4pi) (1/|x - y| - 1/(|x| |x* - y|))`.

use statrs::function::beta::beta_inc;
use statrs::function::gamma::gamma;

use super::{diagonal_values, pairwise_distances, DiagonalRule, Kernel, Provenance};
use crate::error::{Error, Result};

fn normalization(n: f64, alpha: f64) -> f64 {
    gamma(n / 2.0)
        / (2f64.powf(alpha) * std::f64::consts::PI.powf(n / 2.0) * gamma(alpha / 2.0).powi(2))
}

/// Boggio's formula at separation `r = |x - y|` with boundary factors
/// `wx = 1 - |x|^2`, `wy = 1 - |y|^2`.
pub fn green_ball_value(r: f64, wx: f64, wy: f64, alpha: f64, n: f64) -> f64 {
    let r0 = wx * wy / (r * r);
    let s0 = r0 / (1.0 + r0);
    let a = alpha / 2.0;
    let b = (n - alpha) / 2.0;
    normalization(n, alpha) * r.powf(alpha - n) * beta_inc(a, b, s0)
}

/// Kernel matrix on points of the open unit ball in `R^n`.
pub fn green_ball_kernel(
    coords: &[Vec<f64>],
    alpha: f64,
    n: usize,
    rule: &DiagonalRule,
) -> Result<Kernel> {
    let nf = n as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::BadAlpha { alpha, n: nf });
    }
    let np = coords.len();
    let mut weight = Vec::with_capacity(np);
    for (index, c) in coords.iter().enumerate() {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                index,
                expected: n,
                found: c.len(),
            });
        }
        let w = 1.0 - c.iter().map(|v| v * v).sum::<f64>();
        if w <= 0.0 {
            return Err(Error::PointOutsideBall { index });
        }
        weight.push(w);
    }
    let dist = pairwise_distances(coords)?;
    let mut diagonal = Vec::with_capacity(np);
    if let DiagonalRule::HalfNearest = rule {
        let half = diagonal_values(&dist, np, rule, |h| h)?;
        for x in 0..np {
            diagonal.push(green_ball_value(half[x], weight[x], weight[x], alpha, nf));
        }
    } else {
        diagonal = diagonal_values(&dist, np, rule, |h| h)?;
    }
    let mut data = vec![0.0; np * np];
    for x in 0..np {
        for y in 0..np {
            data[x * np + y] = if x == y {
                diagonal[x]
            } else {
                green_ball_value(dist[x * np + y], weight[x], weight[y], alpha, nf)
            };
        }
    }
    Kernel::from_flat(np, data, Provenance::GreenBall)
}
