//! Experiment runner: reads an [`ExperimentConfig`], runs it, and writes
//! `trajectory.csv`, `errors.csv`, `plot.gp` and `summary.json`.

pub mod config;
pub mod experiments;
pub mod output;

use thiserror::Error;

pub use config::{EpsSpec, Experiment, ExperimentConfig, Resolved, System};
pub use output::{Check, ErrorRow, Report, Series};

/// Caps the number of parallel sweep workers.
pub const THREADS_ENV: &str = "LIEGEN_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(liegen_core::Error),
}

impl From<liegen_core::Error> for RunError {
    fn from(e: liegen_core::Error) -> Self {
        match e {
            liegen_core::Error::ConfigInvalid(msg) => RunError::Config(msg),
            other => RunError::Numerical(other),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }
}

/// A finished run.
#[derive(Debug)]
pub struct Outcome {
    pub config: Resolved,
    pub report: Report,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }

    /// 0 when every declared tolerance holds, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass() {
            0
        } else {
            1
        }
    }
}

fn thread_count() -> Result<Option<usize>, RunError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(RunError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

/// Runs the experiment without writing anything.
pub fn compute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let resolved = cfg.resolve()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count()? {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| RunError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| experiments::run(&resolved))?;
    Ok(Outcome {
        config: resolved,
        report,
    })
}

/// Runs the experiment and writes its artifacts into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let outcome = compute(cfg)?;
    output::write_all(&outcome.config, &outcome.report)?;
    Ok(outcome)
}
