//! Positive kernels on finite spaces and their structural constants.
//!
//! A kernel is an `N x N` matrix of strictly positive finite reals. For a
//! symmetric kernel, `d = 1/G` is a quasi-metric and the least constant
//! `kappa` in `d(x, y) <= kappa [d(x, z) + d(z, y)]` is computed exactly by
//! enumerating triples. Triples with `x = y = z` contribute the ratio `1/2`,
//! so `kappa >= 1/2` on every matrix handled here.

mod green_ball;
mod wmp;

use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use green_ball::{green_ball_kernel, green_ball_value};
pub use wmp::{wmp_constant, WmpMode, WmpOptions, WmpReport, WmpWitness};

/// Where a kernel matrix came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    Riesz,
    GreenBall,
    Modified,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Explicit => "explicit",
            Provenance::Riesz => "riesz",
            Provenance::GreenBall => "green_ball",
            Provenance::Modified => "modified",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Provenance::Explicit),
            "riesz" => Ok(Provenance::Riesz),
            "green_ball" => Ok(Provenance::GreenBall),
            "modified" => Ok(Provenance::Modified),
            other => Err(Error::Parse(format!("unknown provenance `{other}`"))),
        }
    }
}

/// How the diagonal of a discretized singular kernel is filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRule {
    /// `G(x, x)` is the off-diagonal formula evaluated at half the distance
    /// from `x` to its nearest neighbour.
    HalfNearest,
    /// User-supplied diagonal values.
    Explicit(Vec<f64>),
}

impl DiagonalRule {
    pub fn name(&self) -> &'static str {
        match self {
            DiagonalRule::HalfNearest => "half_nearest",
            DiagonalRule::Explicit(_) => "explicit",
        }
    }
}

/// Exact quasi-metric constant with the triple attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiMetric {
    pub kappa: f64,
    /// `(x, y, z)` with `d(x, y) = kappa [d(x, z) + d(z, y)]`.
    pub witness: (usize, usize, usize),
}

impl QuasiMetric {
    /// `max(kappa, 1/2)`, used by every downstream constant.
    pub fn effective(&self) -> f64 {
        self.kappa.max(0.5)
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    n: usize,
    data: Vec<f64>,
    symmetric: bool,
    provenance: Provenance,
    quasi_metric: OnceLock<Option<QuasiMetric>>,
    qs_constant: OnceLock<f64>,
}

impl PartialEq for Kernel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.data == other.data
    }
}

impl Kernel {
    /// Builds a kernel from a row-major `n x n` buffer.
    pub fn from_flat(n: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySpace);
        }
        if data.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "kernel matrix",
                expected: n * n,
                found: data.len(),
            });
        }
        for (k, &value) in data.iter().enumerate() {
            let (row, col) = (k / n, k % n);
            if !value.is_finite() {
                return Err(Error::NonFiniteEntry { row, col, value });
            }
            if value <= 0.0 {
                return Err(Error::NonPositiveEntry { row, col, value });
            }
        }
        let symmetric = (0..n).all(|i| (0..i).all(|j| data[i * n + j] == data[j * n + i]));
        Ok(Self {
            n,
            data,
            symmetric,
            provenance,
            quasi_metric: OnceLock::new(),
            qs_constant: OnceLock::new(),
        })
    }

    /// Builds an explicit kernel from rows.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows_with(rows, Provenance::Explicit)
    }

    pub fn from_rows_with(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let n = rows.len();
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare {
                    row,
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Self::from_flat(n, rows.into_iter().flatten().collect(), provenance)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.n + y]
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn require_symmetric(&self) -> Result<()> {
        if self.symmetric {
            return Ok(());
        }
        for i in 0..self.n {
            for j in 0..i {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        unreachable!("asymmetric kernel without an asymmetric pair")
    }

    /// Exact quasi-metric constant of `d = 1/G` (cached).
    pub fn quasi_metric(&self) -> Result<QuasiMetric> {
        self.require_symmetric()?;
        let qm = self
            .quasi_metric
            .get_or_init(|| Some(triple_maximum(self)))
            .expect("symmetric kernel always has a quasi-metric constant");
        Ok(qm)
    }

    /// Quasi-symmetry constant (cached).
    pub fn qs_constant(&self) -> f64 {
        *self.qs_constant.get_or_init(|| quasi_symmetry_constant(self))
    }

    /// `c G` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Kernel> {
        Kernel::from_flat(
            self.n,
            self.data.iter().map(|g| g * c).collect(),
            self.provenance,
        )
    }

    /// Principal submatrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> Result<Kernel> {
        let data = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Kernel::from_flat(indices.len(), data, self.provenance)
    }

    /// `(G nu)(x) = sum_y G(x, y) nu_y` for every `x`.
    pub fn apply(&self, weights: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|row| crate::numeric::dot(row, weights))
            .collect()
    }

    /// Adjoint potential `(G* nu)(x) = sum_y G(y, x) nu_y`.
    pub fn apply_adjoint(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|x| {
                crate::numeric::compensated_sum((0..self.n).map(|y| self.get(y, x) * weights[y]))
            })
            .collect()
    }
}

/// Wraps an explicit matrix as a kernel.
pub fn kernel_from_matrix(rows: Vec<Vec<f64>>) -> Result<Kernel> {
    Kernel::from_rows(rows)
}

fn triple_maximum(kernel: &Kernel) -> QuasiMetric {
    let n = kernel.n();
    let d = |a: usize, b: usize| 1.0 / kernel.get(a, b);
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, (x, x, x));
            for y in 0..n {
                let dxy = d(x, y);
                for z in 0..n {
                    let ratio = dxy / (d(x, z) + d(z, y));
                    if ratio > best.0 {
                        best = (ratio, (x, y, z));
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, (usize::MAX, usize::MAX, usize::MAX)),
            pick_max,
        );
    QuasiMetric {
        kappa: best.0,
        witness: best.1,
    }
}

// Deterministic max: ties go to the lexicographically smallest witness.
fn pick_max<W: Ord + Copy>(a: (f64, W), b: (f64, W)) -> (f64, W) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Exact quasi-metric constant; requires a symmetric kernel.
pub fn quasi_metric_constant(kernel: &Kernel) -> Result<QuasiMetric> {
    kernel.quasi_metric()
}

/// Smallest `a >= 1` with `a^{-1} G(y, x) <= G(x, y) <= a G(y, x)`.
pub fn quasi_symmetry_constant(kernel: &Kernel) -> f64 {
    let n = kernel.n();
    let mut a = 1.0_f64;
    for x in 0..n {
        for y in 0..x {
            let r = kernel.get(x, y) / kernel.get(y, x);
            a = a.max(r).max(1.0 / r);
        }
    }
    a
}

/// `G^s(x, y) = G(x, y) + G(y, x)`.
pub fn symmetrize(kernel: &Kernel) -> Kernel {
    let n = kernel.n();
    let data = (0..n * n)
        .map(|k| {
            let (x, y) = (k / n, k % n);
            kernel.get(x, y) + kernel.get(y, x)
        })
        .collect();
    Kernel::from_flat(n, data, kernel.provenance()).expect("sum of positive entries is positive")
}

/// `|x - y|^{alpha - n}` off the diagonal, diagonal by `rule`.
pub fn riesz_kernel(coords: &[Vec<f64>], alpha: f64, n: f64, rule: &DiagonalRule) -> Result<Kernel> {
    if !(alpha > 0.0 && alpha < n && n.is_finite()) {
        return Err(Error::BadAlpha { alpha, n });
    }
    let exponent = alpha - n;
    let dist = pairwise_distances(coords)?;
    let np = coords.len();
    let diagonal = diagonal_values(&dist, np, rule, |r| r.powf(exponent))?;
    let mut data = vec![0.0; np * np];
    for x in 0..np {
        for y in 0..np {
            data[x * np + y] = if x == y {
                diagonal[x]
            } else {
                dist[x * np + y].powf(exponent)
            };
        }
    }
    Kernel::from_flat(np, data, Provenance::Riesz)
}

pub(crate) fn pairwise_distances(coords: &[Vec<f64>]) -> Result<Vec<f64>> {
    let np = coords.len();
    if np == 0 {
        return Err(Error::EmptySpace);
    }
    let mut dist = vec![0.0; np * np];
    for x in 0..np {
        for y in 0..x {
            let r = coords[x]
                .iter()
                .zip(&coords[y])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if r == 0.0 {
                return Err(Error::DuplicatePoints {
                    first: y,
                    second: x,
                });
            }
            dist[x * np + y] = r;
            dist[y * np + x] = r;
        }
    }
    Ok(dist)
}

pub(crate) fn diagonal_values(
    dist: &[f64],
    np: usize,
    rule: &DiagonalRule,
    formula: impl Fn(f64) -> f64,
) -> Result<Vec<f64>> {
    match rule {
        DiagonalRule::HalfNearest => {
            if np < 2 {
                return Err(Error::InvalidInput(
                    "half_nearest diagonal rule needs at least two points".into(),
                ));
            }
            Ok((0..np)
                .map(|x| {
                    let h = (0..np)
                        .filter(|&y| y != x)
                        .map(|y| dist[x * np + y])
                        .fold(f64::INFINITY, f64::min);
                    formula(h / 2.0)
                })
                .collect())
        }
        DiagonalRule::Explicit(values) => {
            if values.len() != np {
                return Err(Error::LengthMismatch {
                    what: "explicit diagonal",
                    expected: np,
                    found: values.len(),
                });
            }
            Ok(values.clone())
        }
    }
}

/// A strictly positive weight function `m` used to form `G / (m (x) m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Modifier {
    values: Vec<f64>,
    pole: Option<usize>,
}

impl Modifier {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::BadModifier { index, value });
        }
        Ok(Self { values, pole: None })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            pole: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pole(&self) -> Option<usize> {
        self.pole
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|&m| m == 1.0)
    }
}

/// `g(x) = min{1, G(x, x0)}`.
pub fn green_modifier(kernel: &Kernel, x0: usize) -> Result<Modifier> {
    if x0 >= kernel.n() {
        return Err(Error::IndexOutOfRange {
            index: x0,
            n: kernel.n(),
        });
    }
    let values = (0..kernel.n()).map(|x| kernel.get(x, x0).min(1.0)).collect();
    Ok(Modifier {
        values,
        pole: Some(x0),
    })
}

/// `G~(x, y) = G(x, y) / (m(x) m(y))`.
pub fn modify(kernel: &Kernel, modifier: &Modifier) -> Result<Kernel> {
    let n = kernel.n();
    if modifier.values.len() != n {
        return Err(Error::LengthMismatch {
            what: "modifier",
            expected: n,
            found: modifier.values.len(),
        });
    }
    let m = &modifier.values;
    let data = (0..n * n)
        .map(|k| {
            let (x, y) = (k / n, k % n);
            kernel.get(x, y) / (m[x] * m[y])
        })
        .collect();
    Kernel::from_flat(n, data, Provenance::Modified)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtolemyReport {
    /// Largest `d(x,y) d(x0,z) / [d(x,z) d(y,x0) + d(x0,x) d(z,y)]`.
    pub worst_ratio: f64,
    /// `(x, y, z, x0)` attaining the worst ratio.
    pub witness: (usize, usize, usize, usize),
    /// `4 kappa^2`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks the four-point inequality
/// `d(x,y) d(x0,z) <= 4 kappa^2 [d(x,z) d(y,x0) + d(x0,x) d(z,y)]`.
pub fn ptolemy_check(kernel: &Kernel) -> Result<PtolemyReport> {
    let qm = kernel.quasi_metric()?;
    let n = kernel.n();
    let d = |a: usize, b: usize| 1.0 / kernel.get(a, b);
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut best = (f64::NEG_INFINITY, (x, x, x, x));
            for y in 0..n {
                let dxy = d(x, y);
                for z in 0..n {
                    let (dxz, dzy) = (d(x, z), d(z, y));
                    for p in 0..n {
                        let rhs = dxz * d(y, p) + d(p, x) * dzy;
                        let lhs = dxy * d(p, z);
                        // degenerate quadruples contribute nothing
                        if rhs <= 0.0 {
                            continue;
                        }
                        let ratio = lhs / rhs;
                        if ratio > best.0 {
                            best = (ratio, (x, y, z, p));
                        }
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, (usize::MAX, usize::MAX, usize::MAX, usize::MAX)),
            pick_max,
        );
    let kappa = qm.effective();
    let bound = 4.0 * kappa * kappa;
    Ok(PtolemyReport {
        worst_ratio: best.0,
        witness: best.1,
        bound,
        pass: best.0 <= bound * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiabilityCertificate {
    pub pole: usize,
    pub kappa: f64,
    pub kappa_modified: f64,
    /// `4 kappa^2`.
    pub bound: f64,
    /// `2 kappa~`, the WMP constant of the modified kernel.
    pub wmp_bound_modified: f64,
    pub pass: bool,
    pub modifier: Modifier,
}

/// Builds the Green-modified kernel with pole `x0` and checks
/// `kappa~ <= 4 kappa^2`.
pub fn modifiability_certificate(kernel: &Kernel, x0: usize) -> Result<ModifiabilityCertificate> {
    let qm = kernel.quasi_metric()?;
    let modifier = green_modifier(kernel, x0)?;
    let modified = modify(kernel, &modifier)?;
    let qm_mod = modified.quasi_metric()?;
    let kappa = qm.effective();
    let bound = 4.0 * kappa * kappa;
    Ok(ModifiabilityCertificate {
        pole: x0,
        kappa: qm.kappa,
        kappa_modified: qm_mod.kappa,
        bound,
        wmp_bound_modified: 2.0 * qm_mod.effective(),
        pass: qm_mod.kappa <= bound * (1.0 + 1e-12),
        modifier,
    })
}
