//! One function per subcommand. Each writes its files into the output
//! directory and returns the report plus the exit code it earned.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde_json::{json, Value};
use sublinear::capacity::{wiener_capacity, CapacityMode};
use sublinear::io::{write_potentials, write_radial, write_solution};
use sublinear::kernels::{modifiability_certificate, modify, ptolemy_check, wmp_constant, WmpMode, WmpOptions};
use sublinear::potentials::{cached_embedding_constant, embedding_constant, lorentz_diagnostic, KappaCache};
use sublinear::solver::{
    bilateral_bounds, compare_bounds, existence_check, solve, solve_modified, transformed_problem,
    verify_bilateral_with, BilateralReport,
};
use sublinear::space::ball_decomposition;
use sublinear::{Exponent, IndexSet, Kernel, SolveStatus};

use crate::error::{config, exit, CliError, CliResult};
use crate::scenario::{CapacityModeSpec, KernelSpec, Scenario, WmpModeSpec};

/// What a command produced: the `result` section of the report, a one-line
/// verdict for the terminal and the process exit code.
pub struct Outcome {
    pub result: Value,
    pub verdict: String,
    pub code: i32,
}

fn create(out: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = out.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn set_label(set: &IndexSet) -> String {
    set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn checked_set(indices: &[usize], n: usize) -> CliResult<IndexSet> {
    let set = IndexSet::new(indices.to_vec());
    set.check_bounds(n)?;
    Ok(set)
}

fn bilateral_summary(report: &BilateralReport) -> Value {
    json!({
        "pass": report.pass,
        "lower_pass": report.lower_pass,
        "upper_pass": report.upper_pass,
        "proven_lower_pass": report.proven_lower_pass,
        "worst_lower_ratio": report.worst_lower,
        "worst_upper_ratio": report.worst_upper,
        "lower_witness": report.lower_witness,
        "upper_witness": report.upper_witness,
        "lower_bound": report.lower_bound,
        "upper_bound": report.upper_bound,
        "proven_lower_bound": report.proven_lower_bound,
    })
}

pub fn solve_cmd(scenario: &Scenario, out: &Path) -> CliResult<Outcome> {
    let problem = scenario.problem()?;
    let opts = scenario.tolerances.solve();
    let scale = scenario.params.scale_u;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(config("`params.scale_u` must be positive"));
    }
    let (result, bilateral, kappa_modified) = match problem.modifier() {
        Some(m) => {
            let m = m.values().to_vec();
            let solution = solve_modified(&problem, &opts)?;
            let mut bilateral = solution.bilateral;
            if scale != 1.0 && solution.result.status == SolveStatus::Converged {
                let transformed = transformed_problem(&problem)?;
                let profile = transformed.profile(&opts.embedding)?;
                let bounds = bilateral_bounds(&transformed, &profile, &solution.result.constants).scaled(&m);
                let u: Vec<f64> = solution.result.u.iter().map(|v| v * scale).collect();
                bilateral = Some(compare_bounds(problem.sigma(), &u, bounds, solution.result.constants));
            }
            (solution.result, bilateral, Some(solution.kappa_modified))
        }
        None => {
            let result = solve(&problem, &opts)?;
            let bilateral = if result.status == SolveStatus::Converged {
                let profile = problem.profile(&opts.embedding)?;
                let u: Vec<f64> = result.u.iter().map(|v| v * scale).collect();
                Some(verify_bilateral_with(&problem, &u, &profile, &result.constants))
            } else {
                None
            };
            (result, bilateral, None)
        }
    };
    let u: Vec<f64> = result.u.iter().map(|v| v * scale).collect();
    write_solution(create(out, "solution.csv")?, &u, bilateral.as_ref())?;

    let (code, verdict) = match (&result.status, &bilateral) {
        (SolveStatus::Converged, Some(b)) if b.pass => (exit::OK, "converged, bilateral bounds PASS".to_string()),
        (SolveStatus::Converged, Some(b)) => {
            let side = if b.upper_pass { "lower" } else { "upper" };
            let witness = if b.upper_pass { b.lower_witness } else { b.upper_witness };
            (exit::FAIL, format!("converged, {side} bound FAIL at point {witness}"))
        }
        (status, _) => (exit::NONEXISTENCE, format!("no solution: {status}")),
    };
    let c = &result.constants;
    let result = json!({
        "status": result.status,
        "iterations": result.iterations,
        "residual": result.residual,
        "monotone": result.monotone,
        "scale_u": scale,
        "u": u,
        "constants": {
            "q": c.q,
            "kappa": c.kappa,
            "kappa_eff": c.kappa_eff,
            "wmp": c.wmp,
            "lower": c.lower,
            "upper": c.upper,
            "lower_vector": c.lower_vector,
            "seed": c.seed,
        },
        "kappa_modified": kappa_modified,
        "bilateral": bilateral.as_ref().map(bilateral_summary),
    });
    Ok(Outcome { result, verdict, code })
}

pub fn potentials_cmd(scenario: &Scenario, out: &Path) -> CliResult<Outcome> {
    let problem = scenario.problem()?;
    let emb = scenario.tolerances.embedding();
    let profile = problem.profile(&emb)?;
    write_potentials(create(out, "potentials.csv")?, &profile)?;
    let certificates: Vec<Value> = problem
        .cache()
        .certificates()
        .iter()
        .map(|c| {
            json!({
                "set": c.set_e,
                "kappa": c.value,
                "phi": c.phi,
                "gap": c.gap,
                "iterations": c.iterations,
                "maximizer": c.maximizer,
            })
        })
        .collect();
    let result = json!({
        "g_sigma": profile.g_sigma,
        "k_sigma": profile.k_sigma,
        "g_mu": profile.g_mu,
        "h": profile.h,
        "certificates": certificates,
    });
    Ok(Outcome {
        result,
        verdict: format!("potentials written, {} kappa certificates", certificates.len()),
        code: exit::OK,
    })
}

pub fn kappa_cmd(scenario: &Scenario, out: &Path) -> CliResult<Outcome> {
    let problem = scenario.problem()?;
    let emb = scenario.tolerances.embedding();
    let n = problem.n();
    let sets = match &scenario.params.sets {
        Some(sets) => sets.iter().map(|s| checked_set(s, n)).collect::<CliResult<Vec<_>>>()?,
        None => vec![IndexSet::all(n)],
    };
    let mut w = create(out, "kappa.csv")?;
    use std::io::Write;
    let io_err = |source| CliError::Io {
        path: out.join("kappa.csv").display().to_string(),
        source,
    };
    writeln!(w, "set,kappa,gap,lebesgue_norm,lorentz_norm,lebesgue_ratio,lorentz_ratio").map_err(io_err)?;
    let ratio = |r: Option<f64>| r.map_or_else(|| "empty".to_string(), |v| v.to_string());
    let mut rows = Vec::new();
    for set in &sets {
        let cert = embedding_constant(problem.kernel(), problem.sigma(), problem.q(), set, &emb)?;
        let lorentz = lorentz_diagnostic(problem.kernel(), problem.sigma(), problem.q(), set, &emb)?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            set_label(set),
            cert.value,
            cert.gap,
            lorentz.lebesgue_norm,
            lorentz.lorentz_norm,
            ratio(lorentz.lebesgue_ratio),
            ratio(lorentz.lorentz_ratio)
        )
        .map_err(io_err)?;
        rows.push(json!({
            "set": set,
            "kappa": cert.value,
            "phi": cert.phi,
            "gap": cert.gap,
            "iterations": cert.iterations,
            "maximizer": cert.maximizer,
            "lebesgue_norm": lorentz.lebesgue_norm,
            "lorentz_norm": lorentz.lorentz_norm,
            "lebesgue_ratio": lorentz.lebesgue_ratio,
            "lorentz_ratio": lorentz.lorentz_ratio,
        }));
    }
    w.flush().map_err(io_err)?;
    Ok(Outcome {
        verdict: format!("{} embedding constants computed", rows.len()),
        result: json!({ "sets": rows }),
        code: exit::OK,
    })
}

/// The kernel a structural command works on: the modified kernel when the
/// scenario asks for one.
fn effective_kernel(scenario: &Scenario) -> CliResult<Kernel> {
    let space = scenario.measure_space()?;
    let (kernel, modifier) = scenario.kernel(&space)?;
    Ok(match modifier {
        Some(m) => modify(&kernel, &m)?,
        None => kernel,
    })
}

pub fn capacity_cmd(scenario: &Scenario, out: &Path) -> CliResult<Outcome> {
    let kernel = effective_kernel(scenario)?;
    let set = match &scenario.params.set_k {
        Some(s) => checked_set(s, kernel.n())?,
        None => IndexSet::all(kernel.n()),
    };
    let mode = match scenario.params.capacity_mode {
        CapacityModeSpec::Exact => CapacityMode::Exact,
        CapacityModeSpec::Bracket => CapacityMode::Bracket,
    };
    let cap = wiener_capacity(&kernel, &set, mode, scenario.tolerances.subset_limit)?;
    let mut w = create(out, "equilibrium.csv")?;
    use std::io::Write;
    let io_err = |source| CliError::Io {
        path: out.join("equilibrium.csv").display().to_string(),
        source,
    };
    writeln!(w, "point,weight").map_err(io_err)?;
    for (x, v) in cap.equilibrium.iter().enumerate() {
        writeln!(w, "{x},{v}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    let verdict = match cap.cap {
        sublinear::capacity::CapacityValue::Exact { value } => format!("cap = {value}"),
        sublinear::capacity::CapacityValue::Bracket { lower, upper } => format!("cap in [{lower}, {upper}]"),
    };
    Ok(Outcome {
        result: serde_json::to_value(&cap)?,
        verdict,
        code: exit::OK,
    })
}

pub fn verify_cmd(scenario: &Scenario, _out: &Path) -> CliResult<Outcome> {
    let space = scenario.measure_space()?;
    let (kernel, _) = scenario.kernel(&space)?;
    let qm = kernel.quasi_metric()?;
    let mut checks = serde_json::Map::new();
    let mut failed = Vec::new();
    let mut record = |name: &str, pass: bool, detail: Value, failed: &mut Vec<String>| {
        if !pass {
            failed.push(name.to_string());
        }
        let mut detail = detail;
        detail["pass"] = json!(pass);
        checks.insert(name.to_string(), detail);
    };

    record(
        "quasi_metric",
        qm.kappa.is_finite(),
        json!({ "kappa": qm.kappa, "kappa_eff": qm.effective(), "witness": qm.witness }),
        &mut failed,
    );
    let qs = kernel.qs_constant();
    record("quasi_symmetry", qs.is_finite(), json!({ "constant": qs, "symmetric": kernel.is_symmetric() }), &mut failed);

    let wmp = wmp_constant(
        &kernel,
        &WmpOptions {
            mode: match scenario.params.wmp_mode {
                WmpModeSpec::Exact => WmpMode::Exact,
                WmpModeSpec::Sampled => WmpMode::Sampled,
            },
            budget: scenario.tolerances.wmp_budget,
            exact_limit: scenario.tolerances.exact_limit,
            seed: scenario.seed,
        },
    )?;
    record("wmp", wmp.within_bound() != Some(false), serde_json::to_value(&wmp)?, &mut failed);

    let ptolemy = ptolemy_check(&kernel)?;
    record(
        "ptolemy",
        ptolemy.pass,
        json!({ "worst_ratio": ptolemy.worst_ratio, "witness": ptolemy.witness, "bound": ptolemy.bound }),
        &mut failed,
    );

    let poles = match (&scenario.params.poles, &scenario.kernel) {
        (Some(p), _) => p.clone(),
        (None, KernelSpec::Modified { pole, .. }) => vec![*pole],
        (None, _) => (0..kernel.n()).collect(),
    };
    let mut certs = Vec::new();
    let mut all_pass = true;
    for pole in poles {
        let c = modifiability_certificate(&kernel, pole)?;
        all_pass &= c.pass;
        certs.push(json!({
            "pole": c.pole,
            "kappa_modified": c.kappa_modified,
            "bound": c.bound,
            "wmp_bound_modified": c.wmp_bound_modified,
            "pass": c.pass,
        }));
    }
    record("modifiability", all_pass, json!({ "poles": certs }), &mut failed);

    if let KernelSpec::Riesz { alpha, n, .. } = &scenario.kernel {
        // d = |x - y|^s with s = n - alpha: a metric for s <= 1, 2^{s-1} otherwise
        let bound = 2f64.powf(n - alpha - 1.0).max(1.0);
        record(
            "riesz_bound",
            qm.kappa <= bound * (1.0 + 1e-12),
            json!({ "kappa": qm.kappa, "bound": bound }),
            &mut failed,
        );
    }

    let (code, verdict) = if failed.is_empty() {
        (exit::OK, format!("all certificates PASS, kappa = {}", qm.kappa))
    } else {
        (exit::FAIL, format!("FAIL: {}", failed.join(", ")))
    };
    Ok(Outcome {
        result: Value::Object(checks),
        verdict,
        code,
    })
}

pub fn existence_cmd(scenario: &Scenario, _out: &Path) -> CliResult<Outcome> {
    let problem = scenario.problem()?;
    let params = &scenario.params;
    let report = existence_check(&problem, params.x0, params.a, &scenario.tolerances.solve())?;
    let mut verdict = if report.exists { "solution exists".to_string() } else { "no solution".to_string() };
    if let Some(m) = &report.modified {
        verdict += &format!(
            " (modified: kappa~ = {}, modifier mass = {})",
            m.kappa_omega, m.modifier_mass
        );
    }
    Ok(Outcome {
        code: if report.exists { exit::OK } else { exit::NONEXISTENCE },
        result: serde_json::to_value(&report)?,
        verdict,
    })
}

/// `radial_<x>.csv` for every requested center, using the unmodified kernel.
pub fn emit_plot_data(scenario: &Scenario, out: &Path) -> CliResult<Vec<String>> {
    let space = scenario.measure_space()?;
    let (kernel, _) = scenario.kernel(&space)?;
    let q = Exponent::new(scenario.q()?)?;
    let sigma = &space.sigma;
    let emb = scenario.tolerances.embedding();
    let cache = KappaCache::new();
    let centers = match &scenario.params.centers {
        Some(c) => checked_set(c, kernel.n())?.as_slice().to_vec(),
        None => (0..kernel.n()).collect(),
    };
    let mut written = Vec::new();
    for x in centers {
        let dec = ball_decomposition(&kernel, x);
        let sigma_levels: Vec<f64> = dec.sets().iter().map(|b| sigma.mass_of(b)).collect();
        let kappa_levels = dec
            .sets()
            .iter()
            .map(|b| Ok(cached_embedding_constant(&kernel, sigma, q, b, &emb, &cache)?.value))
            .collect::<CliResult<Vec<f64>>>()?;
        let name = format!("radial_{x}.csv");
        write_radial(create(out, &name)?, &dec, &sigma_levels, &kappa_levels)?;
        written.push(name);
    }
    Ok(written)
}

