//! `cxlmemsim`: run, sweep and compare simulated memory-expansion systems.
//!
//! Exit status is 0 on success, 1 for a configuration or usage error and 2
//! when a simulation or an output write fails.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cxlmemsim::config::ConfigError;
use cxlmemsim::systems::{SystemError, SystemKind};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "cxlmemsim", version, about = "Deterministic CXL/PCIe memory expansion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Overrides run.seed and every generator seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Replace existing result files.
    #[arg(long)]
    pub force: bool,
    /// Also write the device event log.
    #[arg(long)]
    pub event_log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Alpha,
    DtFraction,
    BfFraction,
    Threads,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::DtFraction => "dt_fraction",
            Axis::BfFraction => "bf_fraction",
            Axis::Threads => "threads",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment; writes results.csv and summary.txt.
    Run(Common),
    /// Run one experiment per axis value; writes per-point results and sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
    },
    /// Run several system kinds on the same stream; writes compare.csv.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated system kinds, e.g. dram,cxl_ssd,pcie_ssd.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1.., value_parser = parse_kind)]
        kinds: Vec<SystemKind>,
        #[arg(long, value_parser = parse_kind)]
        baseline: SystemKind,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

fn parse_kind(s: &str) -> Result<SystemKind, String> {
    s.parse()
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CXLMEMSIM_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(c) => commands::run(&c),
        Command::Sweep {
            common,
            axis,
            values,
        } => commands::sweep(&common, axis, &values),
        Command::Compare {
            common,
            kinds,
            baseline,
        } => commands::compare(&common, &kinds, baseline),
        Command::Validate { config } => commands::validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
