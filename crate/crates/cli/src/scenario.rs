//! Scenario files: TOML in, a fully resolved and self-contained scenario out.
//!
//! Resolution inlines every CSV the scenario points at and fills every
//! default, so the resolved form reruns without the original files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublinear::io::{read_kernel_file, read_points_file, KernelMeta};
use sublinear::kernels::{green_ball_kernel, green_modifier, riesz_kernel, DiagonalRule, Provenance};
use sublinear::potentials::EmbeddingOptions;
use sublinear::space::{build_space, MeasureSpace, PointSource};
use sublinear::{Forcing, Kernel, Modifier, Problem, SolveOptions};

use crate::error::{config, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Seed for randomized checks (sampled WMP search).
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceSpec,
    pub kernel: KernelSpec,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    /// Point CSV (`x1..xd`, `sigma`, `mu`, `f`), relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Matrix {
        /// Headerless CSV; a `kernel.meta` next to it is read when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        matrix: Option<Vec<Vec<f64>>>,
        /// Declares the matrix quasi-metric, which requires symmetry.
        #[serde(default)]
        quasi_metric: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        provenance: Option<Provenance>,
    },
    Riesz {
        alpha: f64,
        n: f64,
        #[serde(default = "half_nearest")]
        diagonal_rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagonal: Option<Vec<f64>>,
    },
    GreenBall {
        alpha: f64,
        n: usize,
        #[serde(default = "half_nearest")]
        diagonal_rule: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        diagonal: Option<Vec<f64>>,
    },
    /// Green modification of `base` with pole `pole`.
    Modified { pole: usize, base: Box<KernelSpec> },
}

fn half_nearest() -> String {
    "half_nearest".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// `mu` when the space has one, else `f` when present, else none.
    #[default]
    Auto,
    None,
    Mu,
    F,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default)]
    pub forcing: ForcingKind,
}

/// Every numeric default in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative sup-norm change and residual tolerance of the iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Entries above this count as blow-up.
    pub divergence: f64,
    /// Absolute Frank-Wolfe gap.
    pub gap: f64,
    /// Relative Frank-Wolfe gap.
    pub rel_gap: f64,
    pub embedding_max_iter: usize,
    pub line_search_steps: usize,
    /// Largest set for exact capacity enumeration.
    pub subset_limit: usize,
    /// Largest space for exact WMP enumeration.
    pub exact_limit: usize,
    /// LPs (exact) or sampled supports (sampled) for the WMP search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wmp_budget: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100_000,
            divergence: 1e100,
            gap: 1e-9,
            rel_gap: 1e-8,
            embedding_max_iter: 100_000,
            line_search_steps: 30,
            subset_limit: 16,
            exact_limit: 12,
            wmp_budget: None,
        }
    }
}

impl Tolerances {
    pub fn embedding(&self) -> EmbeddingOptions {
        EmbeddingOptions {
            gap_tol: self.gap,
            rel_tol: self.rel_gap,
            max_iter: self.embedding_max_iter,
            line_search_steps: self.line_search_steps,
        }
    }

    pub fn solve(&self) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            divergence: self.divergence,
            embedding: self.embedding(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityModeSpec {
    #[default]
    Exact,
    Bracket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WmpModeSpec {
    #[default]
    Exact,
    Sampled,
}

/// Command parameters. Point indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Centers for radial plot data; all points when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centers: Option<Vec<usize>>,
    /// Sets for the `kappa` command; the whole space when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sets: Option<Vec<Vec<usize>>>,
    /// Set for the `capacity` command; the whole space when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set_k: Option<Vec<usize>>,
    pub capacity_mode: CapacityModeSpec,
    pub wmp_mode: WmpModeSpec,
    /// Poles checked by `verify`; all points when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poles: Option<Vec<usize>>,
    /// Base point of the existence tail integrals.
    pub x0: usize,
    /// Lower limit of the existence tail integrals.
    pub a: f64,
    /// Test hook: `solve` multiplies the solution by this before verifying.
    pub scale_u: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            centers: None,
            sets: None,
            set_k: None,
            capacity_mode: CapacityModeSpec::Exact,
            wmp_mode: WmpModeSpec::Exact,
            poles: None,
            x0: 0,
            a: 1.0,
            scale_u: 1.0,
        }
    }
}

fn read_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Scenario {
    /// Reads a scenario from TOML, or from the `scenario` field of a JSON report.
    pub fn load(path: &Path) -> CliResult<(Scenario, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| read_error(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let scenario = if path.extension().is_some_and(|e| e == "json") {
            let report: serde_json::Value = serde_json::from_str(&text)?;
            let embedded = report
                .get("scenario")
                .ok_or_else(|| config("report has no embedded `scenario`"))?;
            serde_json::from_value(embedded.clone())?
        } else {
            toml::from_str(&text)?
        };
        Ok((scenario, base))
    }

    /// Inlines referenced files and fills defaults; `base` anchors relative paths.
    pub fn resolve(mut self, base: &Path) -> CliResult<Scenario> {
        if let Some(points) = self.space.points.take() {
            let s = &self.space;
            if s.coords.is_some() || s.sigma.is_some() || s.mu.is_some() || s.f.is_some() || s.size.is_some() {
                return Err(config("`space.points` excludes inline size, coords, sigma, mu and f"));
            }
            let table = read_points_file(&base.join(&points))?;
            self.space = SpaceSpec {
                points: None,
                size: table.coords.is_none().then_some(table.len()),
                coords: table.coords,
                sigma: Some(table.sigma),
                mu: table.mu,
                f: table.f,
            };
        }
        if self.space.sigma.is_none() {
            return Err(config("`space.sigma` is required"));
        }
        if self.space.coords.is_some() {
            self.space.size = None;
        }
        self.kernel = resolve_kernel(self.kernel, base)?;
        Ok(self)
    }

    pub fn measure_space(&self) -> CliResult<MeasureSpace> {
        let s = &self.space;
        let sigma = s.sigma.clone().ok_or_else(|| config("`space.sigma` is required"))?;
        let source = match (&s.coords, s.size) {
            (Some(c), _) => PointSource::Coords(c.clone()),
            (None, Some(n)) => PointSource::Size(n),
            (None, None) => PointSource::Size(sigma.len()),
        };
        Ok(build_space(source, sigma, s.mu.clone(), s.f.clone())?)
    }

    /// The unmodified kernel and, for `modified` specs, the Green modifier.
    pub fn kernel(&self, space: &MeasureSpace) -> CliResult<(Kernel, Option<Modifier>)> {
        let (kernel, modifier) = build_kernel(&self.kernel, space)?;
        if kernel.n() != space.sigma.len() {
            return Err(config(format!(
                "kernel has {} points but the space has {}",
                kernel.n(),
                space.sigma.len()
            )));
        }
        Ok((kernel, modifier))
    }

    pub fn q(&self) -> CliResult<f64> {
        self.problem.q.ok_or_else(|| config("`problem.q` is required for this command"))
    }

    pub fn problem(&self) -> CliResult<Problem> {
        let space = self.measure_space()?;
        let (kernel, modifier) = self.kernel(&space)?;
        let forcing = match self.problem.forcing {
            ForcingKind::None => Forcing::None,
            ForcingKind::Mu => Forcing::Mu(
                space.mu.clone().ok_or_else(|| config("forcing `mu` needs `space.mu`"))?,
            ),
            ForcingKind::F => Forcing::F(
                space.f.clone().ok_or_else(|| config("forcing `f` needs `space.f`"))?,
            ),
            ForcingKind::Auto => match (&space.mu, &space.f) {
                (Some(_), Some(_)) => {
                    return Err(config("both `mu` and `f` given; set `problem.forcing`"))
                }
                (Some(mu), None) => Forcing::Mu(mu.clone()),
                (None, Some(f)) => Forcing::F(f.clone()),
                (None, None) => Forcing::None,
            },
        };
        let problem = Problem::new(kernel, space.sigma, self.q()?, forcing)?;
        Ok(match modifier {
            Some(m) => problem.with_modifier(m)?,
            None => problem,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario types serialize to TOML")
    }
}

fn resolve_kernel(spec: KernelSpec, base: &Path) -> CliResult<KernelSpec> {
    Ok(match spec {
        KernelSpec::Matrix {
            path: Some(path),
            matrix,
            quasi_metric,
            provenance,
        } => {
            if matrix.is_some() {
                return Err(config("`kernel.path` and `kernel.matrix` are exclusive"));
            }
            let (kernel, meta): (Kernel, KernelMeta) = read_kernel_file(&base.join(path))?;
            KernelSpec::Matrix {
                path: None,
                matrix: Some(kernel.rows().map(<[f64]>::to_vec).collect()),
                quasi_metric,
                provenance: provenance.or(Some(meta.provenance)),
            }
        }
        KernelSpec::Matrix { path: None, matrix: None, .. } => {
            return Err(config("matrix kernel needs `path` or `matrix`"));
        }
        KernelSpec::Modified { pole, base: inner } => KernelSpec::Modified {
            pole,
            base: Box::new(resolve_kernel(*inner, base)?),
        },
        other => other,
    })
}

fn diagonal(rule: &str, values: &Option<Vec<f64>>) -> CliResult<DiagonalRule> {
    match (rule, values) {
        ("half_nearest", None) => Ok(DiagonalRule::HalfNearest),
        ("explicit", Some(v)) => Ok(DiagonalRule::Explicit(v.clone())),
        ("explicit", None) => Err(config("diagonal rule `explicit` needs `diagonal`")),
        ("half_nearest", Some(_)) => Err(config("`diagonal` is only used with `diagonal_rule = \"explicit\"`")),
        (other, _) => Err(config(format!("unknown diagonal rule `{other}`"))),
    }
}

fn coords(space: &MeasureSpace, what: &str) -> CliResult<Vec<Vec<f64>>> {
    space
        .space
        .coords()
        .map(<[Vec<f64>]>::to_vec)
        .ok_or_else(|| config(format!("{what} kernel needs point coordinates")))
}

fn build_kernel(spec: &KernelSpec, space: &MeasureSpace) -> CliResult<(Kernel, Option<Modifier>)> {
    Ok(match spec {
        KernelSpec::Matrix {
            matrix,
            quasi_metric,
            provenance,
            ..
        } => {
            let rows = matrix.clone().ok_or_else(|| config("unresolved matrix kernel"))?;
            let kernel = Kernel::from_rows_with(rows, provenance.unwrap_or(Provenance::Explicit))?;
            if *quasi_metric {
                kernel.require_symmetric()?;
            }
            (kernel, None)
        }
        KernelSpec::Riesz {
            alpha,
            n,
            diagonal_rule,
            diagonal: d,
        } => (
            riesz_kernel(&coords(space, "riesz")?, *alpha, *n, &diagonal(diagonal_rule, d)?)?,
            None,
        ),
        KernelSpec::GreenBall {
            alpha,
            n,
            diagonal_rule,
            diagonal: d,
        } => (
            green_ball_kernel(&coords(space, "green_ball")?, *alpha, *n, &diagonal(diagonal_rule, d)?)?,
            None,
        ),
        KernelSpec::Modified { pole, base } => {
            let (kernel, inner) = build_kernel(base, space)?;
            if inner.is_some() {
                return Err(config("a modified kernel cannot wrap another modified kernel"));
            }
            let modifier = green_modifier(&kernel, *pole)?;
            (kernel, Some(modifier))
        }
    })
}
