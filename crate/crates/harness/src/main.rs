use std::path::PathBuf;
use std::process::ExitCode;

use blowup_harness::config::{load_config, parse_config, Experiment, DEFAULT_CONFIG};
use blowup_harness::{execute, HarnessError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "blowup-lab",
    version,
    about = "Blow-up experiments for a random nonlocal reaction-diffusion equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat TOML config file; the shipped default when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 picks the number of cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Exit nonzero when the run produces any falsification finding.
    #[arg(long, global = true)]
    strict: bool,
    /// Replace the master seed from the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    /// Replace the time horizon, keeping the path step.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Replace the output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve the equation on every replicate and emit traces.
    Simulate,
    /// Per-path stopping-time bounds against numerical blow-up times.
    Bounds,
    /// Analytic blow-up probability bounds against Monte Carlo.
    Probability,
    /// Invariant and property suite.
    Validate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match drive(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn drive(cli: &Cli) -> Result<u8, HarnessError> {
    let loaded = match &cli.config {
        Some(path) => load_config(path)?,
        None => parse_config(DEFAULT_CONFIG)?,
    };
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let mut config = loaded.config;
    config.experiment = match cli.command {
        Command::Simulate => Experiment::Simulate,
        Command::Bounds => Experiment::Bounds,
        Command::Probability => Experiment::Probability,
        Command::Validate => Experiment::Validate,
    };
    if let Some(seed) = cli.seed_override {
        config = config.with_seed(seed);
    }
    if let Some(h) = cli.horizon {
        config = config.with_horizon(h)?;
    }
    if let Some(dir) = &cli.output_dir {
        config.output_dir = dir.clone();
    }
    if config.experiment == Experiment::Probability && config.ensemble_size < blowup_core::probability::MIN_ENSEMBLE {
        return Err(blowup_harness::config::ConfigError::Invalid(vec![format!(
            "probability experiment needs ensemble_size ≥ {}",
            blowup_core::probability::MIN_ENSEMBLE
        )])
        .into());
    }
    print!("{}", config.canonical());
    let jobs = if cli.jobs == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        cli.jobs
    };
    let (outcome, ledger) = execute(&config, jobs)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    println!(
        "wrote {} file(s) to {} in {:.1}s; findings: {}",
        ledger.outputs.len(),
        config.output_dir.display(),
        ledger.wall_seconds,
        outcome.findings
    );
    Ok(if cli.strict && outcome.findings > 0 { 1 } else { 0 })
}
