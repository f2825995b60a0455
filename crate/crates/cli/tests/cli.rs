//! End-to-end runs of the binary on small scenarios with known answers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

const TWO_POINT: &str = r#"
[space]
sigma = [1, 1]

[kernel]
type = "matrix"
matrix = [[2, 1], [1, 2]]

[problem]
q = 0.5
"#;

const ONE_POINT: &str = r#"
[space]
sigma = [1]

[kernel]
type = "matrix"
matrix = [[1]]

[problem]
q = 0.5
"#;

struct Run {
    code: i32,
    out: PathBuf,
    stdout: String,
    stderr: String,
}

impl Run {
    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }

    fn report(&self) -> serde_json::Value {
        serde_json::from_str(&self.read("report.json")).unwrap()
    }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(command: &str, scenario: &Path, out: &Path, extra: &[&str]) -> Run {
    let output = Command::new(env!("CARGO_BIN_EXE_sublinear"))
        .arg(command)
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: output.status.code().unwrap(),
        out: out.to_path_buf(),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn run_text(command: &str, text: &str, extra: &[&str]) -> (TempDir, Run) {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "scenario_in.toml", text);
    let r = run(command, &scenario, &dir.path().join("out"), extra);
    (dir, r)
}

/// Parses a CSV column by header name.
fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let at = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(at).unwrap().to_string()).collect()
}

fn numbers(csv: &str, name: &str) -> Vec<f64> {
    column(csv, name).iter().map(|v| v.parse().unwrap()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn one_point_solve_passes() {
    let (_d, r) = run_text("solve", ONE_POINT, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let u = numbers(&r.read("solution.csv"), "u");
    assert_eq!(u.len(), 1);
    assert!(close(u[0], 1.0, 1e-10));
    assert_eq!(r.report()["result"]["bilateral"]["pass"], true);
    assert!(r.stdout.contains("PASS"));
}

#[test]
fn two_point_solve_gives_nine() {
    let (_d, r) = run_text("solve", TWO_POINT, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.read("solution.csv");
    for u in numbers(&csv, "u") {
        assert!(close(u, 9.0, 1e-10));
    }
    assert_eq!(numbers(&csv, "upper_bound").len(), 2);
}

#[test]
fn scaled_solution_fails_upper_bound() {
    let text = format!("{TWO_POINT}\n[params]\nscale_u = 20\n");
    let (_d, r) = run_text("solve", &text, &[]);
    assert_eq!(r.code, 2);
    let b = &r.report()["result"]["bilateral"];
    assert_eq!(b["upper_pass"], false);
    assert!(b["upper_witness"].is_u64());
    assert!(r.stdout.contains("upper bound FAIL at point"));
}

#[test]
fn blow_up_is_nonexistence() {
    let text = format!("{TWO_POINT}\n[tolerances]\ndivergence = 1.0\n");
    let (_d, r) = run_text("solve", &text, &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let (_d, r) = run_text("check-existence", &text, &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(r.report()["result"]["exists"], false);
}

#[test]
fn potentials_and_radial_steps() {
    let text = format!("{TWO_POINT}\n[params]\ncenters = [1]\n");
    let (_d, r) = run_text("potentials", &text, &["--emit-plot-data"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.read("potentials.csv");
    for k in numbers(&csv, "k_sigma") {
        assert!(close(k, 8.0, 1e-8));
    }
    assert_eq!(numbers(&csv, "g_sigma"), vec![3.0, 3.0]);
    assert_eq!(numbers(&csv, "g_mu"), vec![0.0, 0.0]);
    assert!(!r.out.join("radial_0.csv").exists());
    let radial = r.read("radial_1.csv");
    assert_eq!(numbers(&radial, "r"), vec![0.0, 0.5, 1.0]);
    assert_eq!(numbers(&radial, "sigma_ball"), vec![0.0, 1.0, 2.0]);
    let kappa = numbers(&radial, "kappa_ball");
    assert!(close(kappa[1], 2.0, 1e-8) && close(kappa[2], 6.0, 1e-8));
    assert!(!r.report()["result"]["certificates"].as_array().unwrap().is_empty());
}

#[test]
fn kappa_reports_empty_ratio_without_mass() {
    let text = r#"
        [space]
        sigma = [1, 0]
        [kernel]
        type = "matrix"
        matrix = [[2, 1], [1, 2]]
        [problem]
        q = 0.5
        [params]
        sets = [[1], [0, 1]]
    "#;
    let (_d, r) = run_text("kappa", text, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = r.read("kappa.csv");
    assert_eq!(column(&csv, "set"), vec!["1", "0 1"]);
    assert_eq!(column(&csv, "lorentz_ratio")[0], "empty");
    assert_eq!(numbers(&csv, "kappa")[0], 0.0);
}

#[test]
fn capacity_of_two_points() {
    let text = format!("{TWO_POINT}\n[params]\nset_k = [0, 1]\n");
    let (_d, r) = run_text("capacity", &text, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.report();
    let cap = report["result"]["cap"]["value"].as_f64().unwrap();
    assert!(close(cap, 2.0 / 3.0, 1e-12));
    let weights = numbers(&r.read("equilibrium.csv"), "weight");
    assert!(weights.iter().all(|w| close(*w, 1.0 / 3.0, 1e-12)));

    let bracket = format!("{TWO_POINT}\n[params]\ncapacity_mode = \"bracket\"\n");
    let (_d, r) = run_text("capacity", &bracket, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cap = &r.report()["result"]["cap"];
    assert_eq!(cap["kind"], "bracket");
}

#[test]
fn metric_kernel_verifies() {
    // d = 1/G is the path metric 1, 1, 2 on three collinear points
    let text = r#"
        [space]
        sigma = [1, 1, 1]
        [kernel]
        type = "matrix"
        matrix = [[4, 1, 0.5], [1, 4, 1], [0.5, 1, 4]]
    "#;
    let (_d, r) = run_text("verify", text, &[]);
    assert_eq!(r.code, 0, "{} {}", r.stdout, r.stderr);
    let result = &r.report()["result"];
    assert!(close(result["quasi_metric"]["kappa"].as_f64().unwrap(), 1.0, 1e-12));
    assert!(result["wmp"]["b_empirical"].as_f64().unwrap() <= 2.0 + 1e-9);
    assert_eq!(result["ptolemy"]["pass"], true);
}

#[test]
fn asymmetric_quasi_metric_is_rejected() {
    let text = r#"
        [space]
        sigma = [1, 1]
        [kernel]
        type = "matrix"
        matrix = [[2, 1], [1.5, 2]]
        quasi_metric = true
    "#;
    let (_d, r) = run_text("verify", text, &[]);
    assert_eq!(r.code, 65);
    assert!(r.stderr.contains("symmetric"), "{}", r.stderr);
}

#[test]
fn riesz_bound_is_reported() {
    let text = r#"
        [space]
        coords = [[0, 0, 0], [1, 0, 0], [0, 2, 0], [0.5, 0.5, 1]]
        sigma = [1, 1, 1, 1]
        [kernel]
        type = "riesz"
        alpha = 1
        n = 3
    "#;
    let (_d, r) = run_text("verify", text, &[]);
    let result = &r.report()["result"];
    let bound = &result["riesz_bound"];
    assert_eq!(bound["bound"], 2.0);
    assert_eq!(bound["pass"], true);
    assert!(result["quasi_metric"]["kappa"].as_f64().unwrap() <= 2.0);
}

#[test]
fn modified_existence_prints_verdict() {
    let text = r#"
        [space]
        sigma = [1, 1]
        mu = [1, 0]
        [kernel]
        type = "modified"
        pole = 0
        [kernel.base]
        type = "matrix"
        matrix = [[2, 0.5], [0.5, 2]]
        [problem]
        q = 0.5
    "#;
    let (_d, r) = run_text("check-existence", text, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = &r.report()["result"]["modified"];
    assert!(m["kappa_omega"].as_f64().unwrap() > 0.0);
    assert!(m["modifier_mass"].as_f64().unwrap() > 0.0);
    assert!(r.stdout.contains("modifier mass"));

    let (_d, r) = run_text("solve", text, &[]);
    assert_eq!(r.code, 0, "{} {}", r.stdout, r.stderr);
    assert!(r.report()["result"]["kappa_modified"].is_f64());
}

#[test]
fn trivial_one_point_exists() {
    let (_d, r) = run_text("check-existence", ONE_POINT, &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.report()["result"]["exists"], true);
}

#[test]
fn config_errors_exit_64() {
    let (_d, r) = run_text("solve", "[space]\nsigma = [1]\n", &[]);
    assert_eq!(r.code, 64);
    let (_d, r) = run_text("solve", &TWO_POINT.replace("q = 0.5", "q = 1.5"), &[]);
    assert_eq!(r.code, 64);
    let (_d, r) = run_text("solve", &format!("{TWO_POINT}\nbogus = 1\n"), &[]);
    assert_eq!(r.code, 64);
    let output = Command::new(env!("CARGO_BIN_EXE_sublinear")).arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(64));
}

#[test]
fn points_csv_and_kernel_files_are_inlined() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "points.csv", "sigma,mu\n1,0.5\n1,0\n");
    write(dir.path(), "kernel.csv", "2,1\n1,2\n");
    write(dir.path(), "kernel.meta", "provenance=explicit\n");
    let scenario = write(
        dir.path(),
        "s.toml",
        "[space]\npoints = \"points.csv\"\n[kernel]\ntype = \"matrix\"\npath = \"kernel.csv\"\n[problem]\nq = 0.5\n",
    );
    let r = run("solve", &scenario, &dir.path().join("out"), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let resolved = r.read("scenario.toml");
    assert!(!resolved.contains("points.csv") && !resolved.contains("kernel.csv"));
    assert!(resolved.contains("mu = [0.5, 0.0]"));
}

#[test]
fn reruns_are_byte_identical() {
    let text = format!("seed = 7\n{TWO_POINT}\n[params]\nwmp_mode = \"sampled\"\n[tolerances]\nwmp_budget = 50\n");
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "s.toml", &text);
    for command in ["solve", "verify", "potentials"] {
        let a = run(command, &scenario, &dir.path().join("a"), &["--emit-plot-data"]);
        let b = run(command, &scenario, &dir.path().join("b"), &["--emit-plot-data"]);
        assert_eq!(a.code, b.code);
        for name in ["report.json", "scenario.toml", "radial_0.csv"] {
            assert_eq!(a.read(name), b.read(name), "{command}: {name}");
        }
    }
}

#[test]
fn report_round_trips() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "s.toml", &format!("{TWO_POINT}\n[params]\nscale_u = 2\n"));
    let first = run("solve", &scenario, &dir.path().join("first"), &[]);
    let from_report = run("solve", &first.out.join("report.json"), &dir.path().join("second"), &[]);
    let from_toml = run("solve", &first.out.join("scenario.toml"), &dir.path().join("third"), &[]);
    for again in [&from_report, &from_toml] {
        assert_eq!(again.code, first.code);
        for name in ["report.json", "solution.csv", "scenario.toml"] {
            assert_eq!(again.read(name), first.read(name), "{name}");
        }
    }
}
