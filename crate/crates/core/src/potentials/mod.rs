//! Linear potential `G sigma`, embedding constants and the intrinsic
//! potential `K sigma`.
//!
//! Both potentials are radial integrals of a set function of the ball
//! `B(x, r)`. On a finite space the ball is a step function of `r`, so the
//! integral `int_0^inf F(B(x, r)) / r^2 dr` is the exact finite sum
//! `sum_j F(B_j) (g_j - g_{j+1})`.

mod embedding;
mod lorentz;

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::Serialize;

pub use embedding::{
    embedding_constant, embedding_constant_from, EmbeddingCertificate, EmbeddingOptions,
};
pub use lorentz::{lorentz_diagnostic, LorentzDiagnostic};

use crate::error::{Error, Result};
use crate::kernels::{modify, Kernel, Modifier};
use crate::numeric::Exponent;
use crate::space::{ball_decomposition, IndexSet, Measure};

/// `(G sigma)(x) = sum_y G(x, y) sigma_y`.
pub fn potential(kernel: &Kernel, measure: &Measure) -> Vec<f64> {
    kernel.apply(measure.weights())
}

/// `G sigma (x)` through its radial representation.
pub fn potential_radial(kernel: &Kernel, measure: &Measure, x: usize) -> f64 {
    let dec = ball_decomposition(kernel, x);
    let masses: Vec<f64> = dec.sets().iter().map(|b| measure.mass_of(b)).collect();
    dec.radial_sum(&masses)
}

/// Certificates of `kappa(E)` keyed by `E` intersected with the support of
/// sigma (the constant only sees that part). A cache belongs to a single
/// `(kernel, sigma, q)` triple.
#[derive(Debug, Default)]
pub struct KappaCache {
    entries: RwLock<HashMap<IndexSet, Arc<EmbeddingCertificate>>>,
}

impl KappaCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &IndexSet) -> Option<Arc<EmbeddingCertificate>> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    /// Inserts unless a certificate is already present; returns the stored one.
    pub fn insert(&self, cert: EmbeddingCertificate) -> Arc<EmbeddingCertificate> {
        let mut map = self.entries.write().expect("cache lock");
        map.entry(cert.set_e.clone())
            .or_insert_with(|| Arc::new(cert))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All certificates ordered by set size, then lexicographically.
    pub fn certificates(&self) -> Vec<Arc<EmbeddingCertificate>> {
        let map = self.entries.read().expect("cache lock");
        let mut out: Vec<_> = map.values().cloned().collect();
        out.sort_by(|a, b| {
            a.set_e
                .len()
                .cmp(&b.set_e.len())
                .then_with(|| a.set_e.cmp(&b.set_e))
        });
        out
    }

    // Maximizer of the largest cached strict subset of `key`.
    fn warm_start(&self, key: &IndexSet) -> Option<Vec<f64>> {
        let map = self.entries.read().expect("cache lock");
        map.iter()
            .filter(|(k, _)| k.len() < key.len() && k.is_subset(key) && !k.is_empty())
            .max_by(|a, b| a.0.len().cmp(&b.0.len()).then_with(|| b.0.cmp(a.0)))
            .map(|(_, c)| c.maximizer.clone())
    }
}

fn sigma_key(set: &IndexSet, sigma: &Measure) -> IndexSet {
    IndexSet::new(set.iter().filter(|&y| sigma.weights()[y] > 0.0).collect())
}

/// `kappa(E)` through the cache.
pub fn cached_embedding_constant(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    set_e: &IndexSet,
    options: &EmbeddingOptions,
    cache: &KappaCache,
) -> Result<Arc<EmbeddingCertificate>> {
    let key = sigma_key(set_e, sigma);
    if let Some(c) = cache.get(&key) {
        return Ok(c);
    }
    let start = cache.warm_start(&key);
    let cert = embedding_constant_from(kernel, sigma, q, &key, options, start.as_deref())?;
    Ok(cache.insert(cert))
}

/// Fills the cache with every ball set of every center. Sets are processed
/// by increasing size so warm starts never depend on thread timing.
pub fn fill_ball_cache(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    options: &EmbeddingOptions,
    cache: &KappaCache,
) -> Result<()> {
    let mut by_size: BTreeMap<usize, Vec<IndexSet>> = BTreeMap::new();
    let mut seen = std::collections::HashSet::new();
    for x in 0..kernel.n() {
        for b in ball_decomposition(kernel, x).sets() {
            let key = sigma_key(b, sigma);
            if cache.get(&key).is_none() && seen.insert(key.clone()) {
                by_size.entry(key.len()).or_default().push(key);
            }
        }
    }
    for (_, mut sets) in by_size {
        sets.sort();
        let certs: Vec<EmbeddingCertificate> = sets
            .par_iter()
            .map(|key| {
                let start = cache.warm_start(key);
                embedding_constant_from(kernel, sigma, q, key, options, start.as_deref())
            })
            .collect::<Result<_>>()?;
        for c in certs {
            cache.insert(c);
        }
    }
    Ok(())
}

/// `K sigma (x) = sum_j kappa(B_j)^{q/(1-q)} (g_j - g_{j+1})`.
pub fn intrinsic_potential(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    options: &EmbeddingOptions,
) -> Result<Vec<f64>> {
    intrinsic_potential_cached(kernel, sigma, q, options, &KappaCache::new())
}

pub fn intrinsic_potential_cached(
    kernel: &Kernel,
    sigma: &Measure,
    q: Exponent,
    options: &EmbeddingOptions,
    cache: &KappaCache,
) -> Result<Vec<f64>> {
    check_sigma(kernel, sigma)?;
    fill_ball_cache(kernel, sigma, q, options, cache)?;
    (0..kernel.n())
        .into_par_iter()
        .map(|x| {
            let dec = ball_decomposition(kernel, x);
            let per_level: Vec<f64> = dec
                .sets()
                .iter()
                .map(|b| {
                    cached_embedding_constant(kernel, sigma, q, b, options, cache)
                        .map(|c| q.pow_ratio(c.value))
                })
                .collect::<Result<_>>()?;
            Ok(dec.radial_sum(&per_level))
        })
        .collect()
}

/// `sigma~ = m^{1+q} sigma`.
pub fn modified_sigma(modifier: &Modifier, sigma: &Measure, q: Exponent) -> Result<Measure> {
    Measure::new(
        sigma
            .weights()
            .iter()
            .zip(modifier.values())
            .map(|(s, m)| s * m.powf(1.0 + q.get()))
            .collect(),
    )
}

/// Intrinsic potential of `sigma~` for the modified kernel `G / (m (x) m)`.
pub fn modified_intrinsic_potential(
    kernel: &Kernel,
    modifier: &Modifier,
    sigma: &Measure,
    q: Exponent,
    options: &EmbeddingOptions,
) -> Result<Vec<f64>> {
    let modified = modify(kernel, modifier)?;
    let sigma_mod = modified_sigma(modifier, sigma, q)?;
    intrinsic_potential(&modified, &sigma_mod, q, options)
}

fn check_sigma(kernel: &Kernel, sigma: &Measure) -> Result<()> {
    if sigma.len() != kernel.n() {
        return Err(Error::LengthMismatch {
            what: "sigma",
            expected: kernel.n(),
            found: sigma.len(),
        });
    }
    Ok(())
}

/// `G sigma`, `K sigma`, `G mu` and `h = (G sigma)^{1/(1-q)} + K sigma + G mu`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialProfile {
    pub q: f64,
    pub g_sigma: Vec<f64>,
    pub k_sigma: Vec<f64>,
    pub g_mu: Option<Vec<f64>>,
    pub h: Vec<f64>,
}

impl PotentialProfile {
    /// `(G sigma)^{1/(1-q)} + K sigma`, the homogeneous part of `h`.
    pub fn homogeneous(&self) -> Vec<f64> {
        let q = Exponent::new(self.q).expect("validated exponent");
        self.g_sigma
            .iter()
            .zip(&self.k_sigma)
            .map(|(g, k)| q.pow_dual(*g) + k)
            .collect()
    }
}

pub fn potential_profile(
    kernel: &Kernel,
    sigma: &Measure,
    mu: Option<&Measure>,
    q: Exponent,
    options: &EmbeddingOptions,
    cache: &KappaCache,
) -> Result<PotentialProfile> {
    check_sigma(kernel, sigma)?;
    let g_sigma = potential(kernel, sigma);
    let k_sigma = intrinsic_potential_cached(kernel, sigma, q, options, cache)?;
    let g_mu = match mu {
        Some(m) => {
            check_sigma(kernel, m)?;
            Some(potential(kernel, m))
        }
        None => None,
    };
    let h = (0..kernel.n())
        .map(|x| {
            q.pow_dual(g_sigma[x]) + k_sigma[x] + g_mu.as_ref().map_or(0.0, |g| g[x])
        })
        .collect();
    Ok(PotentialProfile {
        q: q.get(),
        g_sigma,
        k_sigma,
        g_mu,
        h,
    })
}
