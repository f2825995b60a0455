use thiserror::Error;

use crate::kernels::WmpReport;
use crate::lp::LpSolution;
use crate::potentials::EmbeddingCertificate;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("sigma has zero total mass")]
    ZeroSigma,
    #[error("length mismatch for {what}: expected {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} has a negative or non-finite weight {value} at index {index}")]
    BadWeight {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("coordinate vectors must share one dimension (point {index} has {found}, expected {expected})")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("space must contain at least one point")]
    EmptySpace,
    #[error("kernel matrix must be square: row {row} has {found} entries, expected {expected}")]
    NotSquare {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("kernel entry G({row},{col}) = {value} is not positive")]
    NonPositiveEntry { row: usize, col: usize, value: f64 },
    #[error("kernel entry G({row},{col}) = {value} is not finite")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },
    #[error("kernel is not symmetric (G({row},{col}) != G({col},{row}))")]
    NotSymmetric { row: usize, col: usize },
    #[error("points {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },
    #[error("riesz order alpha = {alpha} must satisfy 0 < alpha < n = {n}")]
    BadAlpha { alpha: f64, n: f64 },
    #[error("point {index} lies outside the open unit ball")]
    PointOutsideBall { index: usize },
    #[error("point index {index} out of range for a space of {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("exponent q = {0} outside the supported range [1e-3, 1 - 1e-3]")]
    BadExponent(f64),
    #[error("modifier value {value} at index {index} is not strictly positive and finite")]
    BadModifier { index: usize, value: f64 },
    #[error("expected a non-empty index set")]
    EmptySet,
    #[error("embedding-constant solver did not converge within {iterations} iterations (gap {gap:.3e})", iterations = .0.iterations, gap = .0.gap)]
    NoConvergence(Box<EmbeddingCertificate>),
    #[error("WMP search exhausted its budget of {budget} linear programs")]
    BudgetExhausted {
        budget: usize,
        best: Box<WmpReport>,
    },
    #[error("linear program failed numerically: {reason}")]
    LpNumericalFailure {
        reason: String,
        best: Box<LpSolution>,
    },
    #[error("set of size {size} exceeds the exact-mode subset limit {limit}; use bracket mode")]
    SubsetLimitExceeded { size: usize, limit: usize },
    #[error("seed fails the subsolution test at point {point}: u0 = {seed} > T(u0) = {image}")]
    SeedNotSubsolution { point: usize, seed: f64, image: f64 },
    #[error("iteration did not converge within {iterations} steps (last relative change {last_change:.3e})")]
    MaxIterExceeded {
        iterations: usize,
        last_change: f64,
        trace: Vec<f64>,
    },
    #[error("upward/downward gap stagnated at {gap:.3e} after {iterations} iterations")]
    GapStagnation { iterations: usize, gap: f64 },
    #[error("modified kernel failed quasi-metric certification: {0}")]
    NotQuasiMetricModified(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
