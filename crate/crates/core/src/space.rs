//! Finite measure spaces and the nested-ball decomposition of a kernel row.
//!
//! On a finite space the ball `B(x, r) = { y : G(x, y) > 1/r }` is a step
//! function of `r`: it only changes at the reciprocals of the distinct values
//! of the row `G(x, .)`. Every radial integral `int_0^inf F(B(x, r)) / r^2 dr`
//! therefore collapses to the finite sum `sum_j F(B_j) (g_j - g_{j+1})`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::numeric::compensated_sum;

/// A canonical (sorted, duplicate-free) set of point indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        if self.len() > other.len() {
            return false;
        }
        let mut it = other.0.iter();
        'outer: for a in &self.0 {
            for b in it.by_ref() {
                if b == a {
                    continue 'outer;
                }
                if b > a {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Membership mask over `n` points.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &i in &self.0 {
            m[i] = true;
        }
        m
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.0.last() {
            Some(&i) if i >= n => Err(Error::IndexOutOfRange { index: i, n }),
            _ => Ok(()),
        }
    }
}

impl From<Vec<usize>> for IndexSet {
    fn from(v: Vec<usize>) -> Self {
        Self::new(v)
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// A nonnegative weight vector over the points of a space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    weights: Vec<f64>,
    total: f64,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::named(weights, "measure")
    }

    fn named(weights: Vec<f64>, what: &'static str) -> Result<Self> {
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::BadWeight { what, index, value });
        }
        let total = compensated_sum(weights.iter().copied());
        Ok(Self { weights, total })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
            total: 0.0,
        }
    }

    /// Unit point mass at `y`.
    pub fn dirac(n: usize, y: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[y] = 1.0;
        Self {
            weights,
            total: 1.0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Mass of an index set.
    pub fn mass_of(&self, set: &IndexSet) -> f64 {
        compensated_sum(set.iter().map(|i| self.weights[i]))
    }

    /// The restriction `sigma_E` (zero off `set`).
    pub fn restrict(&self, set: &IndexSet) -> Measure {
        let mut weights = vec![0.0; self.weights.len()];
        for i in set.iter() {
            weights[i] = self.weights[i];
        }
        let total = compensated_sum(weights.iter().copied());
        Measure { weights, total }
    }

    pub fn scaled(&self, t: f64) -> Result<Measure> {
        Measure::new(self.weights.iter().map(|w| w * t).collect())
    }

    /// Points carrying positive mass.
    pub fn support(&self) -> IndexSet {
        IndexSet(
            self.weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > 0.0)
                .map(|(i, _)| i)
                .collect(),
        )
    }
}

/// A finite point set, optionally with coordinates and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    n_points: usize,
    coords: Option<Vec<Vec<f64>>>,
    labels: Option<Vec<String>>,
}

impl Space {
    pub fn with_size(n_points: usize) -> Result<Self> {
        if n_points == 0 {
            return Err(Error::EmptySpace);
        }
        Ok(Self {
            n_points,
            coords: None,
            labels: None,
        })
    }

    pub fn with_coords(coords: Vec<Vec<f64>>) -> Result<Self> {
        let n_points = coords.len();
        if n_points == 0 {
            return Err(Error::EmptySpace);
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: 1,
                found: 0,
            });
        }
        for (index, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dim,
                    found: c.len(),
                });
            }
            if let Some(&value) = c.iter().find(|v| !v.is_finite()) {
                return Err(Error::BadWeight {
                    what: "coordinate",
                    index,
                    value,
                });
            }
        }
        Ok(Self {
            n_points,
            coords: Some(coords),
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_points {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: self.n_points,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn dim(&self) -> Option<usize> {
        self.coords.as_ref().map(|c| c[0].len())
    }
}

/// Either a point count or a coordinate list.
#[derive(Debug, Clone)]
pub enum PointSource {
    Size(usize),
    Coords(Vec<Vec<f64>>),
}

/// A space together with the base measure `sigma` and optional data.
#[derive(Debug, Clone)]
pub struct MeasureSpace {
    pub space: Space,
    pub sigma: Measure,
    pub mu: Option<Measure>,
    pub f: Option<Vec<f64>>,
}

/// Validates and assembles a space with its measures. Rejects `sigma = 0`.
pub fn build_space(
    points: PointSource,
    sigma: Vec<f64>,
    mu: Option<Vec<f64>>,
    f: Option<Vec<f64>>,
) -> Result<MeasureSpace> {
    let space = match points {
        PointSource::Size(n) => Space::with_size(n)?,
        PointSource::Coords(c) => Space::with_coords(c)?,
    };
    let n = space.n_points();
    let check_len = |what: &'static str, len: usize| {
        if len == n {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                what,
                expected: n,
                found: len,
            })
        }
    };
    check_len("sigma", sigma.len())?;
    let sigma = Measure::named(sigma, "sigma")?;
    if sigma.total() <= 0.0 {
        return Err(Error::ZeroSigma);
    }
    let mu = match mu {
        Some(w) => {
            check_len("mu", w.len())?;
            Some(Measure::named(w, "mu")?)
        }
        None => None,
    };
    let f = match f {
        Some(v) => {
            check_len("f", v.len())?;
            if let Some((index, &value)) = v
                .iter()
                .enumerate()
                .find(|(_, x)| !(x.is_finite() && **x >= 0.0))
            {
                return Err(Error::BadWeight {
                    what: "f",
                    index,
                    value,
                });
            }
            Some(v)
        }
        None => None,
    };
    Ok(MeasureSpace {
        space,
        sigma,
        mu,
        f,
    })
}

/// `B(x, r) = { y : G(x, y) > 1/r }`, strict inequality.
pub fn ball(kernel: &Kernel, x: usize, r: f64) -> IndexSet {
    let threshold = 1.0 / r;
    IndexSet(
        kernel
            .row(x)
            .iter()
            .enumerate()
            .filter(|(_, g)| **g > threshold)
            .map(|(y, _)| y)
            .collect(),
    )
}

/// Distinct levels `g_1 > ... > g_m` of a kernel row and the nested sets
/// `B_j = { y : G(x, y) >= g_j }`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallDecomposition {
    center: usize,
    levels: Vec<f64>,
    sets: Vec<IndexSet>,
}

impl BallDecomposition {
    pub fn center(&self) -> usize {
        self.center
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn sets(&self) -> &[IndexSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `g_j - g_{j+1}` with `g_{m+1} = 0`.
    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().enumerate().map(move |(j, &g)| {
            let next = self.levels.get(j + 1).copied().unwrap_or(0.0);
            g - next
        })
    }

    /// Index `j` with `B(x, r) = B_j`, or `None` when the ball is empty
    /// (`r <= 1/g_1`).
    pub fn level_for_radius(&self, r: f64) -> Option<usize> {
        let threshold = 1.0 / r;
        // levels are decreasing; the ball holds every level strictly above 1/r
        let count = self.levels.partition_point(|&g| g > threshold);
        count.checked_sub(1)
    }

    /// The ball `B(x, r)` read off from the decomposition.
    pub fn ball(&self, r: f64) -> IndexSet {
        match self.level_for_radius(r) {
            Some(j) => self.sets[j].clone(),
            None => IndexSet::empty(),
        }
    }

    /// Radii `1/g_j` at which the ball grows.
    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().map(|g| 1.0 / g)
    }

    /// Exact value of `int_0^inf F(B(x, r)) / r^2 dr` for a set function
    /// given per level.
    pub fn radial_sum(&self, per_level: &[f64]) -> f64 {
        debug_assert_eq!(per_level.len(), self.levels.len());
        compensated_sum(self.widths().zip(per_level).map(|(w, v)| w * v))
    }

    /// Exact value of `int_a^inf F(B(x, r)) / r^2 dr`.
    pub fn radial_tail(&self, per_level: &[f64], a: f64) -> f64 {
        let cap = 1.0 / a;
        compensated_sum(self.levels.iter().enumerate().map(|(j, &g)| {
            let next = self.levels.get(j + 1).copied().unwrap_or(0.0);
            (g.min(cap) - next.min(cap)) * per_level[j]
        }))
    }
}

pub fn ball_decomposition(kernel: &Kernel, x: usize) -> BallDecomposition {
    let row = kernel.row(x);
    let mut order: Vec<usize> = (0..row.len()).collect();
    // descending by value, ties by index for a canonical order
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    let mut levels = Vec::new();
    let mut sets = Vec::new();
    let mut members: Vec<usize> = Vec::with_capacity(row.len());
    let mut k = 0;
    while k < order.len() {
        let g = row[order[k]];
        while k < order.len() && row[order[k]] == g {
            members.push(order[k]);
            k += 1;
        }
        levels.push(g);
        sets.push(IndexSet::new(members.clone()));
    }
    BallDecomposition {
        center: x,
        levels,
        sets,
    }
}
