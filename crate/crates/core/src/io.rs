//! CSV ingestion and export, plus the `kernel.meta` sidecar.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{DiagonalRule, Kernel, Provenance};
use crate::potentials::PotentialProfile;
use crate::solver::BilateralReport;
use crate::space::BallDecomposition;

/// Columns of a point file: `x1..xd` (optional), `sigma`, `mu`, `f`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointTable {
    pub coords: Option<Vec<Vec<f64>>>,
    pub sigma: Vec<f64>,
    pub mu: Option<Vec<f64>>,
    pub f: Option<Vec<f64>>,
}

impl PointTable {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

fn parse_number(text: &str, row: usize, column: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {row}, column `{column}`: `{text}` is not a number")))
}

pub fn read_points<R: Read>(reader: R) -> Result<PointTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut coord_cols: Vec<(usize, usize)> = Vec::new();
    let (mut sigma_col, mut mu_col, mut f_col) = (None, None, None);
    for (i, h) in headers.iter().enumerate() {
        match h {
            "sigma" => sigma_col = Some(i),
            "mu" => mu_col = Some(i),
            "f" => f_col = Some(i),
            _ => match h.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                Some(d) if d >= 1 => coord_cols.push((d, i)),
                _ => return Err(Error::Parse(format!("unknown column `{h}`"))),
            },
        }
    }
    let sigma_col = sigma_col.ok_or_else(|| Error::Parse("missing `sigma` column".into()))?;
    coord_cols.sort();
    for (k, (d, _)) in coord_cols.iter().enumerate() {
        if *d != k + 1 {
            return Err(Error::Parse(format!("coordinate columns must be x1..x{}", coord_cols.len())));
        }
    }

    let mut table = PointTable {
        coords: (!coord_cols.is_empty()).then(Vec::new),
        mu: mu_col.map(|_| Vec::new()),
        f: f_col.map(|_| Vec::new()),
        ..PointTable::default()
    };
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let get = |col: usize, name: &str| parse_number(&record[col], row, name);
        table.sigma.push(get(sigma_col, "sigma")?);
        if let (Some(c), Some(v)) = (mu_col, table.mu.as_mut()) {
            v.push(get(c, "mu")?);
        }
        if let (Some(c), Some(v)) = (f_col, table.f.as_mut()) {
            v.push(get(c, "f")?);
        }
        if let Some(coords) = table.coords.as_mut() {
            let point = coord_cols
                .iter()
                .map(|(d, c)| get(*c, &format!("x{d}")))
                .collect::<Result<Vec<f64>>>()?;
            coords.push(point);
        }
    }
    Ok(table)
}

pub fn read_points_file(path: &Path) -> Result<PointTable> {
    read_points(File::open(path)?)
}

/// Headerless `N x N` matrix of decimal reals.
pub fn read_matrix<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .enumerate()
            .map(|(col, v)| parse_number(v, row, &col.to_string()))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    Ok(rows)
}

/// Contents of a `kernel.meta` sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMeta {
    pub provenance: Provenance,
    pub alpha: Option<f64>,
    pub n: Option<f64>,
    pub diagonal_rule: Option<String>,
    /// Keys not understood by this version, kept for round trips.
    pub extra: BTreeMap<String, String>,
}

impl Default for KernelMeta {
    fn default() -> Self {
        Self {
            provenance: Provenance::Explicit,
            alpha: None,
            n: None,
            diagonal_rule: None,
            extra: BTreeMap::new(),
        }
    }
}

impl KernelMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = KernelMeta::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("kernel.meta line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let number = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("kernel.meta: `{key}` = `{v}` is not a number")))
            };
            match key {
                "provenance" => meta.provenance = value.parse()?,
                "alpha" => meta.alpha = Some(number(value)?),
                "n" => meta.n = Some(number(value)?),
                "diagonal_rule" => meta.diagonal_rule = Some(value.to_string()),
                _ => {
                    meta.extra.insert(key.to_string(), value.to_string());
                }
            }
        }
        Ok(meta)
    }

    pub fn render(&self) -> String {
        let mut out = format!("provenance={}\n", self.provenance);
        if let Some(a) = self.alpha {
            out += &format!("alpha={a}\n");
        }
        if let Some(n) = self.n {
            out += &format!("n={n}\n");
        }
        if let Some(r) = &self.diagonal_rule {
            out += &format!("diagonal_rule={r}\n");
        }
        for (k, v) in &self.extra {
            out += &format!("{k}={v}\n");
        }
        out
    }

    pub fn for_rule(provenance: Provenance, alpha: f64, n: f64, rule: &DiagonalRule) -> Self {
        Self {
            provenance,
            alpha: Some(alpha),
            n: Some(n),
            diagonal_rule: Some(rule.name().to_string()),
            extra: BTreeMap::new(),
        }
    }
}

/// Reads a kernel matrix and, when present, the `kernel.meta` file next to it.
pub fn read_kernel_file(path: &Path) -> Result<(Kernel, KernelMeta)> {
    let rows = read_matrix(File::open(path)?)?;
    let meta_path = path.with_file_name("kernel.meta");
    let meta = if meta_path.exists() {
        KernelMeta::parse(&std::fs::read_to_string(meta_path)?)?
    } else {
        KernelMeta::default()
    };
    Ok((Kernel::from_rows_with(rows, meta.provenance)?, meta))
}

pub fn write_matrix<W: Write>(writer: W, kernel: &Kernel) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for row in kernel.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `kernel.csv` and `kernel.meta` into `dir`.
pub fn write_kernel_dir(dir: &Path, kernel: &Kernel, meta: &KernelMeta) -> Result<()> {
    write_matrix(File::create(dir.join("kernel.csv"))?, kernel)?;
    std::fs::write(dir.join("kernel.meta"), meta.render())?;
    Ok(())
}

/// `point,g_sigma,k_sigma,g_mu,h`.
pub fn write_potentials<W: Write>(writer: W, profile: &PotentialProfile) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["point", "g_sigma", "k_sigma", "g_mu", "h"])?;
    for x in 0..profile.g_sigma.len() {
        let g_mu = profile.g_mu.as_ref().map_or(0.0, |g| g[x]);
        w.write_record([
            x.to_string(),
            profile.g_sigma[x].to_string(),
            profile.k_sigma[x].to_string(),
            g_mu.to_string(),
            profile.h[x].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `point,u,lower_bound,upper_bound,lower_ratio,upper_ratio`.
pub fn write_solution<W: Write>(writer: W, u: &[f64], report: Option<&BilateralReport>) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["point", "u", "lower_bound", "upper_bound", "lower_ratio", "upper_ratio"])?;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for (x, ux) in u.iter().enumerate() {
        let pick = |f: fn(&BilateralReport) -> &Vec<f64>| report.map(|r| f(r)[x]);
        w.write_record([
            x.to_string(),
            ux.to_string(),
            cell(pick(|r| &r.lower_bound)),
            cell(pick(|r| &r.upper_bound)),
            cell(pick(|r| &r.lower_ratio)),
            cell(pick(|r| &r.upper_ratio)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Step function data `r, sigma_ball, kappa_ball`: one row at `r = 0` and
/// one per breakpoint `1/g_j`, holding the value on `(1/g_j, 1/g_{j+1}]`.
pub fn write_radial<W: Write>(
    writer: W,
    decomposition: &BallDecomposition,
    sigma_levels: &[f64],
    kappa_levels: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["r", "sigma_ball", "kappa_ball"])?;
    w.write_record(["0", "0", "0"])?;
    for ((r, s), k) in decomposition.breakpoints().zip(sigma_levels).zip(kappa_levels) {
        w.write_record([r.to_string(), s.to_string(), k.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
