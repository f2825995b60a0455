//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sublinear::{Forcing, Kernel, Measure, Problem};

pub const EXPONENTS: [f64; 3] = [0.2, 0.5, 0.8];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positive matrix with no structure beyond positivity.
pub fn random_positive_kernel(rng: &mut ChaCha8Rng, n: usize) -> Kernel {
    let rows = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.05..5.0)).collect())
        .collect();
    Kernel::from_rows(rows).unwrap()
}

/// Pairwise distances of random planar points, or shortest-path distances
/// of a random weighted complete graph.
fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut d = vec![vec![0.0; n]; n];
    if rng.gen_bool(0.5) {
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
        for i in 0..n {
            for j in 0..n {
                d[i][j] = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
            }
        }
    } else {
        for i in 0..n {
            for j in 0..i {
                let w = rng.gen_range(0.1..3.0);
                d[i][j] = w;
                d[j][i] = w;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
    }
    d
}

/// `G = scale / d^s` for a random metric `d`, a random power `s` and a
/// diagonal of at least twice the largest entry of the row.
pub fn random_quasi_metric_kernel(rng: &mut ChaCha8Rng, n: usize) -> Kernel {
    let d = random_metric(rng, n);
    let s = rng.gen_range(0.5..2.5);
    let scale = rng.gen_range(0.2..5.0);
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rows[i][j] = scale / d[i][j].powf(s);
            }
        }
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let top = row.iter().cloned().fold(scale, f64::max);
        row[i] = top * rng.gen_range(2.0..6.0);
    }
    Kernel::from_rows(rows).unwrap()
}

/// Weights in `[0.1, 2)`, each zeroed with probability `zero`, never all zero.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, zero: f64) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(zero) { 0.0 } else { rng.gen_range(0.1..2.0) })
            .collect();
        if w.iter().any(|v| *v > 0.0) {
            return w;
        }
    }
}

pub fn random_measure(rng: &mut ChaCha8Rng, n: usize, zero: f64) -> Measure {
    Measure::new(random_weights(rng, n, zero)).unwrap()
}

/// Problem with a random quasi-metric kernel, sigma, optional mu and q.
pub fn random_problem(rng: &mut ChaCha8Rng, max_n: usize) -> Problem {
    let n = rng.gen_range(1..=max_n);
    let kernel = random_quasi_metric_kernel(rng, n);
    let sigma = random_measure(rng, n, 0.2);
    let q = EXPONENTS[rng.gen_range(0..EXPONENTS.len())];
    let forcing = if rng.gen_bool(0.75) {
        Forcing::Mu(random_measure(rng, n, 0.4))
    } else {
        Forcing::None
    };
    Problem::new(kernel, sigma, q, forcing).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
