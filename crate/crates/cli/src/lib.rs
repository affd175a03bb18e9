//! Batch pipeline: synthesize or ingest sessions, forecast envelopes,
//! schedule, study flexibility and score bids.
//!
//! Every command reads a [`RunConfig`] and writes into its output
//! directory:
//!
//! | command    | reads                         | writes            |
//! |------------|-------------------------------|-------------------|
//! | `synth`    | config                        | `synth/`          |
//! | `ingest`   | sessions CSV or `--synthetic` | `ingest/`         |
//! | `forecast` | `ingest/`                     | `forecast/k<k>/`  |
//! | `schedule` | `ingest/`, prices, DOE        | `schedule/`       |
//! | `flex`     | `ingest/`, prices             | `flex/`           |
//! | `evaluate` | `ingest/`, prices             | `evaluate/`       |

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use fleetflex::forecasting::ForecastError;
use fleetflex::ingest::IngestError;
use fleetflex::market::MarketError;
use fleetflex::polytope::io::EnvelopeIoError;
use fleetflex::scheduling::{ScheduleError, ScheduleIoError};
use thiserror::Error;

pub use config::{RunConfig, WindowHours};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0}")]
    Input(String),
    /// The inputs are valid but the problem has no solution.
    #[error("{0}")]
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Infeasible(_) => 1,
            Self::Input(_) => 2,
        }
    }
}

impl From<ScheduleError> for CliError {
    fn from(e: ScheduleError) -> Self {
        match e {
            ScheduleError::Infeasible { .. }
            | ScheduleError::DoeInfeasible { .. }
            | ScheduleError::EmptyIndividual { .. }
            | ScheduleError::Unbounded
            | ScheduleError::Lp(_) => Self::Infeasible(e.to_string()),
            ScheduleError::Input(_) | ScheduleError::Polytope(_) => Self::Input(e.to_string()),
        }
    }
}

impl From<MarketError> for CliError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Schedule(s) => s.into(),
            other => Self::Input(other.to_string()),
        }
    }
}

macro_rules! input_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Input(e.to_string())
            }
        }
    )*};
}

input_error!(IngestError, ForecastError, EnvelopeIoError, ScheduleIoError, std::io::Error, serde_json::Error);

#[derive(Debug, Parser)]
#[command(name = "fleetflex", version, about = "EV fleet flexibility pipeline")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for the synthetic fleet.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleMode {
    Baseline,
    Doe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum QuantileArg {
    Median,
    Q3,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session CSV.
    Synth,
    /// Clean sessions and build per-date fleet envelopes.
    Ingest {
        /// Use the synthetic fleet instead of a sessions CSV.
        #[arg(long)]
        synthetic: bool,
    },
    /// Train and score forecasters, write forecast envelopes.
    Forecast {
        /// Forecast only this lead (slots); overrides the configured leads.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        lead: Option<u32>,
    },
    /// Cost-optimal schedule for one date.
    Schedule {
        #[arg(long, value_enum, default_value = "baseline")]
        mode: ScheduleMode,
        #[arg(long)]
        date: Option<chrono::NaiveDate>,
        /// Also schedule the envelope forecast at this lead.
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        forecast_lead: Option<u32>,
    },
    /// Flexibility study, bid selection and delivery scoring.
    Flex {
        #[arg(long, value_enum)]
        quantile: Option<QuantileArg>,
    },
    /// Score a fixed bid over the evaluation dates.
    Evaluate {
        /// Bid in kW.
        #[arg(long)]
        bid: f64,
        /// Window label such as 17:30-20:00; every window otherwise.
        #[arg(long)]
        window: Option<String>,
    },
}

/// Loads the configuration, applies flag overrides and runs the command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    cfg.validate()?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Ingest { synthetic } => commands::ingest(&cfg, synthetic),
        Command::Forecast { lead } => commands::forecast(&cfg, lead.map(|k| k as usize)),
        Command::Schedule { mode, date, forecast_lead } => {
            commands::schedule(&cfg, mode, date, forecast_lead.map(|k| k as usize))
        }
        Command::Flex { quantile } => commands::flex(&cfg, quantile),
        Command::Evaluate { bid, window } => commands::evaluate(&cfg, bid, window.as_deref()),
    }
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
