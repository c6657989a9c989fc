//! Command-line front end. Exit codes: 0 success, 1 invalid input,
//! 2 failed check or numerical failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::checks::CheckStatus;
use crate::config::{default_config, load_config, ExperimentConfig};
use crate::experiments::{self, ExperimentError, RunSummary};

#[derive(Debug, Parser)]
#[command(name = "dmme", version, about = "Driven two-qubit master equation with invariant-based controls")]
pub struct Cli {
    /// Flat `key = value` config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Number of output grid points (overrides `grid`).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infidelity curves, fields and rates for three initial conditions.
    Figure1,
    /// psi3(0) and psi4(0) with and without the Lamb shift (T = 0).
    Figure2,
    /// One trajectory from the configured initial state.
    Simulate,
    /// Steady state of the dissipator frozen at one instant.
    Steady {
        /// Time at which the generator is frozen.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Bisection for the g2m where min_t alpha32 first reaches zero.
    ScanG2m {
        #[arg(long, default_value_t = 0.1)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        /// Coarse scan points before bisection.
        #[arg(long, default_value_t = 91)]
        resolution: usize,
    },
    /// Cross-module consistency checks.
    Selfcheck,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Figure1 => "figure1",
            Command::Figure2 => "figure2",
            Command::Simulate => "simulate",
            Command::Steady { .. } => "steady",
            Command::ScanG2m { .. } => "scan-g2m",
            Command::Selfcheck => "selfcheck",
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => default_config()?,
    };
    if let Some(dir) = &cli.out {
        cfg.out_dir = dir.clone();
    }
    if let Some(n) = cli.grid {
        cfg.grid = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command, writing its files and summary. The summary is
/// returned even when checks fail.
pub fn execute(cli: &Cli) -> Result<RunSummary, ExperimentError> {
    let cfg = resolve_config(cli)?;
    let dir = cfg.out_dir.clone();
    let out = Some(dir.as_path());
    let mut summary = match &cli.command {
        Command::Figure1 => experiments::run_figure1(&cfg, out)?.0,
        Command::Figure2 => experiments::run_figure2(&cfg, out)?.0,
        Command::Simulate => experiments::simulate(&cfg, out)?.0,
        Command::Steady { time } => {
            let report = experiments::steady(&cfg, *time)?;
            let path = dir.join("steady.json");
            std::fs::create_dir_all(&dir)
                .and_then(|_| std::fs::write(&path, serde_json::to_string_pretty(&report).expect("report serializes")))
                .map_err(|e| ExperimentError::Io { path: path.display().to_string(), message: e.to_string() })?;
            println!("populations psi1..psi4 at t = {}: {:?}", report.t, report.populations);
            if let Some(d) = report.max_deviation {
                println!("max deviation from detailed balance: {d:e}");
            }
            let mut s = RunSummary::new("steady", &cfg);
            s.files.push(path.display().to_string());
            s
        }
        Command::ScanG2m { lo, hi, resolution } => {
            let est = experiments::scan_alpha_sign(&cfg, *lo, *hi, *resolution)?;
            println!("threshold g2m = {:.6} (bracket [{:.8}, {:.8}])", est.threshold, est.bracket.0, est.bracket.1);
            let mut s = RunSummary::new("scan-g2m", &cfg);
            s.threshold = Some(est);
            s
        }
        Command::Selfcheck => {
            let mut s = RunSummary::new("selfcheck", &cfg);
            s.checks = experiments::selfcheck(&cfg);
            for c in &s.checks {
                let tag = match c.status {
                    CheckStatus::Pass => "PASS",
                    CheckStatus::Fail => "FAIL",
                    CheckStatus::ExpectedFail => "XFAIL",
                };
                println!("{tag:5} {:24} {:>11.3e}  limit {:<8.1e} {}", c.name, c.value, c.tolerance, c.detail);
            }
            s
        }
    };
    for (name, f) in &summary.final_fidelities {
        println!("{name}: final fidelity {f:.10}");
    }
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    summary.command = cli.command.name().to_string();
    summary.write(&dir)?;
    Ok(summary)
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(s) if s.all_passed() => 0,
        Ok(_) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_global_flags() {
        let cli = Cli::try_parse_from(["dmme", "scan-g2m", "--grid", "11", "--lo", "0.2"]).unwrap();
        assert_eq!(cli.grid, Some(11));
        assert!(matches!(cli.command, Command::ScanG2m { lo, .. } if lo == 0.2));
    }

    #[test]
    fn bad_arguments_exit_1() {
        assert_eq!(run(["dmme", "nope"]), 1);
        assert_eq!(run(["dmme", "simulate", "--grid", "1"]), 1);
    }
}
