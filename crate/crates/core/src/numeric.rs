//! Small numeric helpers shared by the potential and solver modules.

use crate::error::{Error, Result};

/// Neumaier's variant of compensated (Kahan) summation.
pub fn compensated_sum<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated dot product of two equally long slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

pub const MIN_EXPONENT: f64 = 1e-3;
pub const MAX_EXPONENT: f64 = 1.0 - 1e-3;

/// The sublinear exponent `q`, restricted to `[1e-3, 1 - 1e-3]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(f64);

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && (MIN_EXPONENT..=MAX_EXPONENT).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::BadExponent(q))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// `q / (1 - q)`.
    #[inline]
    pub fn ratio(self) -> f64 {
        self.0 / (1.0 - self.0)
    }

    /// `1 / (1 - q)`.
    #[inline]
    pub fn dual(self) -> f64 {
        1.0 / (1.0 - self.0)
    }

    fn log_domain(self) -> bool {
        self.0 > 0.9
    }

    /// `t^(q/(1-q))` for `t >= 0`.
    pub fn pow_ratio(self, t: f64) -> f64 {
        self.pow(t, self.ratio())
    }

    /// `t^(1/(1-q))` for `t >= 0`.
    pub fn pow_dual(self, t: f64) -> f64 {
        self.pow(t, self.dual())
    }

    /// `t^q` for `t >= 0`.
    pub fn pow_q(self, t: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else {
            t.powf(self.0)
        }
    }

    fn pow(self, t: f64, e: f64) -> f64 {
        if t == 0.0 {
            0.0
        } else if self.log_domain() {
            (e * t.ln()).exp()
        } else {
            t.powf(e)
        }
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Relative sup-norm distance `max|a-b| / max(1, max|b|)`.
pub fn rel_sup_diff(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    diff / sup_norm(b).max(1.0)
}

pub fn sup_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
