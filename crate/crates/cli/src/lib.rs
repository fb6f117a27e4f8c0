//! `picket` experiment runner.

pub mod commands;
pub mod config;
pub mod record;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::record::ResultRecord;

/// Overrides the worker-thread count (default: available parallelism).
pub const WORKERS_ENV: &str = "PICKET_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] picket_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use picket_core::Error as E;
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Core(E::Domain(_) | E::Validation(_) | E::Parse { .. } | E::Dimension { .. }) => EXIT_VALIDATION,
            CliError::Core(E::Infeasible(_)) => EXIT_INFEASIBLE,
            _ => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "picket", version, about = "Lyapunov spectra and singular-value moments of random matrix products")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Inputs {
    /// Config file of key=value lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// key=value assignments applied after the config file.
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate λ_i(n), c(n), normalized gaps and ε bounds.
    Analytic(Inputs),
    /// Estimate Lyapunov exponents by QR sweeps over sampled products.
    Simulate(Inputs),
    /// Compare residue, quadrature and Monte Carlo moment values.
    Moments(Inputs),
    /// Normalized gap deviations along an n-grid.
    Picketfence(Inputs),
    /// Run the property suite.
    Verify(Inputs),
}

impl Command {
    fn inputs(&self) -> &Inputs {
        match self {
            Command::Analytic(i)
            | Command::Simulate(i)
            | Command::Moments(i)
            | Command::Picketfence(i)
            | Command::Verify(i) => i,
        }
    }
}

pub fn load_config(inputs: &Inputs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &inputs.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?
            .parse()?,
        None => ExperimentConfig::default(),
    };
    for a in &inputs.set {
        cfg.assign(a)?;
    }
    Ok(cfg)
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&w| w > 0)
        .ok_or_else(|| CliError::Validation(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot configure worker pool: {e}")))
}

/// Validate, compute and emit. Validation completes before any computation
/// and before any file is written.
pub fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<ResultRecord, CliError> {
    use commands::*;
    enum Plan {
        Analytic(AnalyticPlan),
        Simulate(SimulatePlan),
        Moments(MomentsPlan),
        Picket(PicketPlan),
        Verify,
    }
    let plan = match command {
        Command::Analytic(_) => Plan::Analytic(plan_analytic(cfg)?),
        Command::Simulate(_) => Plan::Simulate(plan_simulate(cfg)?),
        Command::Moments(_) => Plan::Moments(plan_moments(cfg)?),
        Command::Picketfence(_) => Plan::Picket(plan_picketfence(cfg)?),
        Command::Verify(_) => Plan::Verify,
    };
    record::check_resumable(cfg)?;
    let start = Instant::now();
    let mut rec = match &plan {
        Plan::Analytic(p) => cmd_analytic(cfg, p)?,
        Plan::Simulate(p) => cmd_simulate(cfg, p)?,
        Plan::Moments(p) => cmd_moments(cfg, p)?,
        Plan::Picket(p) => cmd_picketfence(cfg, p)?,
        Plan::Verify => verify::cmd_verify(cfg, &verify::Tolerances::default())?,
    };
    rec.duration = start.elapsed();
    Ok(rec)
}

/// Exit code for a finished record: property failures map to 3.
pub fn finish(rec: &ResultRecord, cfg: &ExperimentConfig) -> Result<i32, CliError> {
    record::emit(rec, cfg)?;
    Ok(if rec.passed { EXIT_OK } else { EXIT_FAILURE })
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let outcome = configure_workers()
        .and_then(|_| load_config(cli.command.inputs()))
        .and_then(|cfg| {
            let rec = execute(&cli.command, &cfg)?;
            finish(&rec, &cfg)
        });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("picket: {e}");
            e.exit_code()
        }
    }
}
