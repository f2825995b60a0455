//! `sublinear <command> <scenario> [--out DIR] [--emit-plot-data]`
//!
//! Every run writes `report.json` (the resolved scenario plus the command
//! result) and `scenario.toml` (the resolved scenario alone) next to the
//! command's CSV output. Either file can be fed back in to rerun the case.

mod commands;
mod error;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::Outcome;
use error::{CliError, CliResult};
use scenario::Scenario;

#[derive(Parser)]
#[command(name = "sublinear", version, about = "Sublinear equations on finite quasi-metric spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Scenario TOML, or a `report.json` from an earlier run.
    scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write `radial_<x>.csv` step functions per center.
    #[arg(long)]
    emit_plot_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the equation and check the bilateral bounds.
    Solve(Common),
    /// Linear and intrinsic potentials with their embedding certificates.
    Potentials(Common),
    /// Embedding constants and Lorentz diagnostics of chosen sets.
    Kappa(Common),
    /// Wiener capacity of a set.
    Capacity(Common),
    /// Structural certificates of the kernel.
    Verify(Common),
    /// Existence criteria and tail integrals.
    CheckExistence(Common),
}

type Handler = fn(&Scenario, &Path) -> CliResult<Outcome>;

impl Command {
    fn parts(&self) -> (&'static str, &Common, Handler) {
        match self {
            Command::Solve(c) => ("solve", c, commands::solve_cmd),
            Command::Potentials(c) => ("potentials", c, commands::potentials_cmd),
            Command::Kappa(c) => ("kappa", c, commands::kappa_cmd),
            Command::Capacity(c) => ("capacity", c, commands::capacity_cmd),
            Command::Verify(c) => ("verify", c, commands::verify_cmd),
            Command::CheckExistence(c) => ("check-existence", c, commands::existence_cmd),
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(command: &Command) -> CliResult<i32> {
    let (name, common, handler) = command.parts();
    let (raw, base) = Scenario::load(&common.scenario)?;
    let scenario = raw.resolve(&base)?;
    std::fs::create_dir_all(&common.out).map_err(|source| CliError::Io {
        path: common.out.display().to_string(),
        source,
    })?;
    write_file(&common.out.join("scenario.toml"), &scenario.to_toml())?;

    let outcome = handler(&scenario, &common.out)?;
    let plot_files = if common.emit_plot_data {
        Some(commands::emit_plot_data(&scenario, &common.out)?)
    } else {
        None
    };
    let report = json!({
        "command": name,
        "scenario": scenario,
        "result": outcome.result,
        "verdict": outcome.verdict,
        "exit_code": outcome.code,
        "plot_data": plot_files,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_file(&common.out.join("report.json"), &text)?;
    println!("{name}: {}", outcome.verdict);
    Ok(outcome.code)
}

fn main() -> ExitCode {
    // usage errors must not collide with the bound-failure code
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::exit::CONFIG as u8 } else { 0 });
        }
    };
    let code = match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
