//! `tfclock`: detuning, particle-number, noise and sweep-rate scans of the
//! twin-Fock lock-in interferometer, plus oracle verification and fits.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{AxisDefaults, RunConfig, Settings, UsageError};

#[derive(Debug, Parser)]
#[command(name = "tfclock", version, about = "Heisenberg-limited frequency estimation with a spin-1 condensate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lock-in curves versus detuning (default N = 10).
    ScanDelta(Settings),
    /// Linewidth and optimal precision versus N, with log-log fits
    /// (default N = 8, 10, ..., 32).
    ScanN(Settings),
    /// Optimal precision versus detection noise
    /// (default N = 18, 24, 30; sigma = 0, 1, 2, 4).
    ScanNoise(Settings),
    /// Lock-in figures versus sweep rate (default N = 30; beta = 0.01, 0.05, 0.1).
    ScanBeta(Settings),
    /// Compare the ideal pipeline against the beam-splitter oracle
    /// (default N = 2, 4, ..., 16).
    VerifyAnalytic(Settings),
    /// Refit a `scan_n.csv` written by `scan-n`.
    Fit {
        /// The `scan_n.csv` to fit.
        #[arg(long)]
        input: PathBuf,
        /// Interrogation time the scan used, for the rescaled intercept.
        #[arg(long, default_value_t = 100.0)]
        big_t: f64,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn even(range: std::ops::RangeInclusive<u32>) -> Vec<u32> {
    range.filter(|n| n % 2 == 0).collect()
}

fn axis_defaults(command: &Command) -> AxisDefaults {
    let base = AxisDefaults::default();
    match command {
        Command::ScanN(_) => AxisDefaults { n_atoms: even(8..=32), ..base },
        Command::ScanNoise(_) => AxisDefaults { n_atoms: vec![18, 24, 30], sigma: vec![0.0, 1.0, 2.0, 4.0], ..base },
        Command::ScanBeta(_) => AxisDefaults { n_atoms: vec![30], beta: vec![0.01, 0.05, 0.1], ..base },
        Command::VerifyAnalytic(_) => AxisDefaults { n_atoms: even(2..=16), ..base },
        _ => base,
    }
}

enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

fn classify(e: anyhow::Error) -> Failure {
    if e.chain().any(|c| c.is::<UsageError>()) {
        Failure::Usage(e)
    } else {
        Failure::Numerical(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let axes = axis_defaults(&cli.command);
    let (settings, command): (Settings, fn(&RunConfig) -> Result<()>) = match cli.command {
        Command::ScanDelta(s) => (s, commands::scan_delta),
        Command::ScanN(s) => (s, commands::scan_n),
        Command::ScanNoise(s) => (s, commands::scan_noise),
        Command::ScanBeta(s) => (s, commands::scan_beta),
        Command::VerifyAnalytic(s) => (s, commands::verify_analytic),
        Command::Fit { input, big_t, out } => return commands::fit(&input, big_t, &out).map_err(classify),
    };
    let cfg = RunConfig::resolve(settings, axes).map_err(Failure::Usage)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Numerical(e.into()))?;
    pool.install(|| command(&cfg)).map_err(classify)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
