//! Command-line harness for future-state prediction of disturbed LTI
//! systems: closed-loop simulation, benchmark reproduction, observer gain
//! design and verification, and a-priori error-bound reporting.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Errors grouped by exit code: 2 for config parsing, 3 for validation,
/// 4 for runtime failures.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }

    pub fn from_core(e: statepred::Error) -> Self {
        use statepred::Error as E;
        match e {
            E::Dimension(_)
            | E::InvalidArgument(_)
            | E::ScheduleCoverage(_)
            | E::NotObservable { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Info,
    Debug,
}

#[derive(Parser)]
#[command(
    name = "statepred",
    version,
    about = "Predict future states of disturbed LTI systems with a high-order disturbance observer"
)]
struct Cli {
    /// Diagnostic verbosity on stderr.
    #[arg(long, value_enum, default_value = "error", global = true)]
    log_level: LogLevel,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop experiment and write trace.csv plus a run manifest.
    Simulate {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Override the seeds recorded in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-run a built-in benchmark study.
    Reproduce {
        #[command(subcommand)]
        target: ReproduceTarget,
    },
    /// Synthesize a certified observer gain and write the certificate.
    Design {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a supplied gain against the certificate conditions.
    VerifyGain {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Gain file (TOML): `l` plus optional `p`, `alpha`, `delta`.
        #[arg(long)]
        gain: PathBuf,
    },
    /// Print the a-priori prediction-error budget for a configuration.
    Bounds {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum ReproduceTarget {
    /// Benchmark sweep over omega in {0.5, 2, 4}: nine-row CSV of per-method
    /// maximum prediction errors plus a comparison table.
    Table2 {
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.log_level {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        })
        .init();

    let result = match &cli.command {
        Command::Simulate { config, out, seed } => commands::cmd_simulate(config, out, *seed),
        Command::Reproduce {
            target: ReproduceTarget::Table2 { out },
        } => commands::cmd_reproduce_table2(out),
        Command::Design { config, out } => commands::cmd_design(config, out),
        Command::VerifyGain { config, gain } => commands::cmd_verify_gain(config, gain),
        Command::Bounds { config } => commands::cmd_bounds(config),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
