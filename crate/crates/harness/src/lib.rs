//! Config-driven experiment runner for the blow-up toolkit.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod ledger;
pub mod validate;

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::experiment::{run, RunOutcome};
use crate::ledger::RunLedger;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] blowup_core::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// Process exit status: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes every artifact under `dir` and returns the ledger entry.
pub fn write_outcome(
    config: &ExperimentConfig,
    outcome: &RunOutcome,
    dir: &Path,
    jobs: usize,
    started: Instant,
) -> Result<RunLedger, HarnessError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut ledger = RunLedger::new(config.experiment.name(), &config.canonical(), config.master_seed, jobs);
    ledger.replicate_seeds = outcome.seeds.iter().map(u64::to_string).collect();
    for a in &outcome.artifacts {
        let path = dir.join(&a.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        std::fs::write(&path, &a.contents).map_err(io_err(&path))?;
        ledger.record_output(&a.name, &a.contents);
    }
    ledger.findings = outcome.findings;
    ledger.wall_seconds = started.elapsed().as_secs_f64();
    ledger.append_to(dir).map_err(io_err(dir))?;
    Ok(ledger)
}

/// Runs the experiment on a pool of `jobs` workers and writes its outputs.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> Result<(RunOutcome, RunLedger), HarnessError> {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let outcome = pool.install(|| run(config))?;
    let ledger = write_outcome(config, &outcome, &config.output_dir, jobs, started)?;
    Ok((outcome, ledger))
}
