//! Dense primal simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so no phase one is needed.
//! Pivoting uses Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable on ratio ties), which cannot cycle.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Constraint multipliers read from the final reduced costs of the slacks.
    pub dual: Vec<f64>,
    pub dual_objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    /// `|b.y - c.x|`.
    pub fn duality_gap(&self) -> f64 {
        (self.dual_objective - self.objective).abs()
    }
}

/// Row-major constraint matrix with `rows x cols` entries.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl DenseLp {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let rows = b.len();
        let cols = c.len();
        if a.len() != rows * cols {
            return Err(Error::LengthMismatch {
                what: "constraint matrix",
                expected: rows * cols,
                found: a.len(),
            });
        }
        if let Some((index, &value)) = b.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::BadWeight {
                what: "right-hand side",
                index,
                value,
            });
        }
        Ok(Self { rows, cols, a, b, c })
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let (m, n) = (self.rows, self.cols);
        let width = n + m;
        let mut t = vec![0.0; m * width];
        for i in 0..m {
            t[i * width..i * width + n].copy_from_slice(&self.a[i * n..(i + 1) * n]);
            t[i * width + n + i] = 1.0;
        }
        let mut rhs = self.b.clone();
        let mut reduced: Vec<f64> = self.c.iter().map(|c| -c).chain(std::iter::repeat_n(0.0, m)).collect();
        let mut value = 0.0;
        let mut basis: Vec<usize> = (n..n + m).collect();
        let scale = self
            .c
            .iter()
            .chain(&self.a)
            .fold(1.0_f64, |s, v| s.max(v.abs()));
        let eps = PIVOT_EPS * scale;

        let mut pivots = 0;
        let max_pivots = 50 * (m + n + 1) * (m + n + 1);
        let status = loop {
            let Some(enter) = (0..width).find(|&j| reduced[j] < -eps) else {
                break LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let coef = t[i * width + enter];
                if coef > eps {
                    let ratio = rhs[i] / coef;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            if ratio < best - eps * best.abs().max(1.0)
                                || (ratio <= best + eps * best.abs().max(1.0)
                                    && basis[i] < basis[k])
                            {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                break LpStatus::Unbounded;
            };

            let p = t[row * width + enter];
            for j in 0..width {
                t[row * width + j] /= p;
            }
            rhs[row] /= p;
            for i in 0..m {
                if i == row {
                    continue;
                }
                let f = t[i * width + enter];
                if f != 0.0 {
                    for j in 0..width {
                        t[i * width + j] -= f * t[row * width + j];
                    }
                    rhs[i] = (rhs[i] - f * rhs[row]).max(0.0);
                }
            }
            let f = reduced[enter];
            for j in 0..width {
                reduced[j] -= f * t[row * width + j];
            }
            value -= f * rhs[row];
            basis[row] = enter;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::LpNumericalFailure {
                    reason: format!("pivot limit {max_pivots} reached"),
                    best: Box::new(self.feasible_part(&basis, &rhs, pivots)),
                });
            }
        };

        let mut x = vec![0.0; n];
        for (i, &var) in basis.iter().enumerate() {
            if var < n {
                x[var] = rhs[i];
            }
        }
        let dual: Vec<f64> = (0..m).map(|i| reduced[n + i].max(0.0)).collect();
        let objective = crate::numeric::dot(&self.c, &x);
        let dual_objective = crate::numeric::dot(&self.b, &dual);
        let _ = value;
        let sol = LpSolution {
            status,
            x,
            objective,
            dual,
            dual_objective,
            pivots,
        };
        if status == LpStatus::Optimal {
            self.certify(&sol)?;
        }
        Ok(sol)
    }

    fn feasible_part(&self, basis: &[usize], rhs: &[f64], pivots: usize) -> LpSolution {
        let n = self.cols;
        let mut x = vec![0.0; n];
        for (i, &var) in basis.iter().enumerate() {
            if var < n {
                x[var] = rhs[i].max(0.0);
            }
        }
        let shrink = self.max_violation_factor(&x);
        for v in &mut x {
            *v /= shrink;
        }
        LpSolution {
            status: LpStatus::Optimal,
            objective: crate::numeric::dot(&self.c, &x),
            x,
            dual: vec![0.0; self.rows],
            dual_objective: f64::INFINITY,
            pivots,
        }
    }

    // Smallest factor s >= 1 with A x / s <= b.
    fn max_violation_factor(&self, x: &[f64]) -> f64 {
        let n = self.cols;
        let mut s = 1.0_f64;
        for i in 0..self.rows {
            let ax = crate::numeric::dot(&self.a[i * n..(i + 1) * n], x);
            if ax > self.b[i] {
                s = s.max(if self.b[i] > 0.0 { ax / self.b[i] } else { f64::INFINITY });
            }
        }
        s
    }

    fn certify(&self, sol: &LpSolution) -> Result<()> {
        let n = self.cols;
        let tol = 1e-9 * (1.0 + sol.objective.abs());
        for i in 0..self.rows {
            let ax = crate::numeric::dot(&self.a[i * n..(i + 1) * n], &sol.x);
            if ax > self.b[i] + 1e-9 * (1.0 + self.b[i].abs()) {
                let mut best = sol.clone();
                let s = self.max_violation_factor(&sol.x);
                best.x.iter_mut().for_each(|v| *v /= s);
                best.objective = crate::numeric::dot(&self.c, &best.x);
                return Err(Error::LpNumericalFailure {
                    reason: format!("primal row {i} violated: {ax} > {}", self.b[i]),
                    best: Box::new(best),
                });
            }
        }
        for j in 0..n {
            let aty = crate::numeric::compensated_sum(
                (0..self.rows).map(|i| self.a[i * n + j] * sol.dual[i]),
            );
            if aty < self.c[j] - tol {
                return Err(Error::LpNumericalFailure {
                    reason: format!("dual column {j} violated: {aty} < {}", self.c[j]),
                    best: Box::new(sol.clone()),
                });
            }
        }
        if sol.duality_gap() > tol {
            return Err(Error::LpNumericalFailure {
                reason: format!("duality gap {:.3e}", sol.duality_gap()),
                best: Box::new(sol.clone()),
            });
        }
        Ok(())
    }
}
