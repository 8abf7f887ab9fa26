//! `ruinkit` command line. Every command reads a JSON run configuration and
//! writes CSV tables plus a JSON summary to the output directory.
//!
//! Exit status: 0 on success, 1 on numerical failure, 2 on invalid input.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use ruinkit::RuinError;

use crate::commands::Context;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "ruinkit", version, about = "Ruin probabilities for a reserve invested in a risky asset")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Monte Carlo ruin frequencies at one or more jump horizons.
    Simulate,
    /// Monte Carlo ruin curve over a capital grid.
    Curve,
    /// Numerical solution of the survival equation.
    Solve,
    /// Roots of the characteristic cubic along a capital grid.
    Roots,
    /// Power-law fit of a solver or Monte Carlo curve.
    Fit,
    /// Solver against Monte Carlo, with residual and tail-exponent checks.
    Crossval,
    /// Probabilities of the events behind the power-law lower bound.
    Lowerbound,
    /// Ladder epochs of the log-price random walk.
    Ladder,
}

pub struct Failure {
    pub exit: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            exit: 2,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Failure {
            exit: 1,
            message: message.into(),
        }
    }
}

impl From<RuinError> for Failure {
    fn from(e: RuinError) -> Self {
        Failure {
            exit: if e.is_input_error() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn workers_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var("RUINKIT_WORKERS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::input(format!("INVALID_ARGUMENT: RUINKIT_WORKERS = {v:?} is not a count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    let path = cli
        .config
        .ok_or_else(|| Failure::input("INVALID_ARGUMENT: --config PATH is required"))?;
    let config = RunConfig::load(&path)?;
    let report = config.model.validate();
    if report.has_violations() {
        return Err(RuinError::InvalidParams(report).into());
    }
    for issue in &report.issues {
        eprintln!("warning: {}: {}", issue.code, issue.message);
    }
    let workers = match cli.workers.or(config.workers) {
        Some(w) => w,
        None => workers_from_env()?.unwrap_or(1),
    };
    if workers == 0 {
        return Err(Failure::input("INVALID_ARGUMENT: workers must be >= 1"));
    }
    let out = cli
        .out
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out).map_err(RuinError::from)?;
    let ctx = Context {
        seed: cli.seed.unwrap_or(config.seed),
        config,
        workers,
        out,
    };
    match cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Curve => commands::curve(&ctx),
        Command::Solve => commands::solve(&ctx),
        Command::Roots => commands::roots(&ctx),
        Command::Fit => commands::fit(&ctx),
        Command::Crossval => commands::crossval(&ctx),
        Command::Lowerbound => commands::lowerbound(&ctx),
        Command::Ladder => commands::ladder(&ctx),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            eprintln!("done in {:.2} s", start.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit)
        }
    }
}
