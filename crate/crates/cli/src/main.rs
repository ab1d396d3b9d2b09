//! `chaoscert`: batch front end for orbit analysis, entropy and horseshoe
//! certificates.
//!
//! Exit codes: 0 when a verdict was reached (failed certificates included),
//! 1 on usage errors, 2 on numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use config::{Flags, Format, RunConfig};
use std::io::Write;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    fn numerical(e: impl std::fmt::Display) -> Self {
        CliError::Numerical(e.to_string())
    }

    fn model(e: chaoscert::models::ModelError) -> Self {
        match e {
            chaoscert::models::ModelError::Strips(e) => CliError::Numerical(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chaoscert", version, about = "Numerical chaos certificates for 3-D flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a flow and export the trajectory.
    Integrate(Flags),
    /// Refine a periodic orbit and report its Floquet data.
    Orbit(Flags),
    /// Topological entropy and word counts of a transition matrix.
    Entropy(Flags),
    /// Build and check a horseshoe certificate.
    Certify(Flags),
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let (flags, f): (&Flags, fn(&RunConfig) -> Result<commands::Outcome, CliError>) = match &cli.command {
        Command::Integrate(f) => (f, commands::integrate),
        Command::Orbit(f) => (f, commands::orbit),
        Command::Entropy(f) => (f, commands::entropy_cmd),
        Command::Certify(f) => (f, commands::certify_cmd),
    };
    let cfg = RunConfig::resolve(flags)?;
    let out = f(&cfg)?;
    let report = serde_json::to_string_pretty(&out.report).expect("report serialises") + "\n";
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = &cfg.out {
        let io = |e: std::io::Error| CliError::Usage(format!("cannot write to {}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("report.json"), &report).map_err(io)?;
        for (name, contents) in &out.files {
            std::fs::write(dir.join(name), contents).map_err(io)?;
        }
    }
    let stdout = match (cfg.format, out.files.first()) {
        (Format::Csv, Some((_, csv))) => csv.as_str(),
        _ => report.as_str(),
    };
    let _ = std::io::stdout().lock().write_all(stdout.as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
