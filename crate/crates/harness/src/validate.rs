//! Desk-scale invariant and property suite over the configured model.

use std::collections::HashSet;
use std::fmt::Write as _;

use blowup_core::bounds::{comparison_ode, upper_bound_inputs, ComparisonRegime};
use blowup_core::fbm::{covariance, replicate_seed, sample_ensemble, TimeGrid, VolterraKernel};
use blowup_core::quadrature::integrate;
use blowup_core::rpde::InitialDatum;
use blowup_core::spectral::apply_semigroup;
use blowup_core::Result;

use crate::config::{Experiment, ExperimentConfig};
use crate::experiment::{
    bounds_csv, evaluate_bounds, fitted_kernel_constant, num, prepare, probability_report, Artifact, OrderingSummary,
    RunOutcome,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn suite(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult { name, passed, detail }
}

/// Paths used by the ordering and reproducibility suites.
pub const VALIDATE_PATHS: usize = 20;
const COVARIANCE_PATHS: usize = 4000;

fn covariance_suite(config: &ExperimentConfig) -> Result<SuiteResult> {
    let h = config.model.hurst;
    let grid = TimeGrid::new(1.0, 64)?;
    let paths = sample_ensemble(
        h,
        grid,
        config.master_seed ^ 0x00C0_FFEE,
        COVARIANCE_PATHS,
        config.sampling,
    )?;
    let nodes = [16usize, 32, 48, 64];
    let n = paths.len() as f64;
    let mut worst: f64 = 0.0;
    for &i in &nodes {
        for &j in &nodes {
            let prods: Vec<f64> = paths.iter().map(|p| p.values[i] * p.values[j]).collect();
            let mean = prods.iter().sum::<f64>() / n;
            let var = prods.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let exact = covariance(h, grid.node(i), grid.node(j))?;
            worst = worst.max((mean - exact).abs() / (var / n).sqrt());
        }
    }
    Ok(suite(
        "fbm_covariance",
        worst < 4.0,
        format!("largest deviation {worst:.2} standard errors"),
    ))
}

fn kernel_suite(config: &ExperimentConfig) -> Result<SuiteResult> {
    let k = VolterraKernel::new(config.model.hurst)?;
    let hv = config.model.hurst.value();
    let mut worst: f64 = 0.0;
    for &t in &[0.5, 1.0, 2.0] {
        let int = integrate(|th| k.eval(t, th).map_or(f64::NAN, |v| v * v), 0.0, t, 1e-14, 1e-11)?;
        worst = worst.max((int / t.powf(2.0 * hv) - 1.0).abs());
    }
    Ok(suite(
        "volterra_normalization",
        worst < 1e-6,
        format!("largest relative error {worst:.2e}"),
    ))
}

fn semigroup_suite(basis: &blowup_core::spectral::SpectralBasis) -> Result<SuiteResult> {
    let phi = basis.phi();
    let mut worst: f64 = 0.0;
    for &t in &[0.01, 0.1, 1.0] {
        let tf = apply_semigroup(basis, phi, t)?;
        let decay = (-basis.lambda1() * t).exp();
        let err = tf
            .iter()
            .zip(phi)
            .fold(0.0f64, |m, (a, p)| m.max((a - decay * p).abs()));
        worst = worst.max(err / basis.phi_sup());
    }
    Ok(suite(
        "semigroup_eigen_identity",
        worst <= 1e-8,
        format!("largest relative error {worst:.2e}"),
    ))
}

fn seed_suite(config: &ExperimentConfig) -> SuiteResult {
    let count = 100_000u64.max(config.ensemble_size as u64);
    let seeds: HashSet<u64> = (0..count).map(|i| replicate_seed(config.master_seed, i)).collect();
    suite(
        "replicate_seed_uniqueness",
        seeds.len() as u64 == count,
        format!("{} distinct of {count}", seeds.len()),
    )
}

pub fn run_validation(config: &ExperimentConfig) -> Result<RunOutcome> {
    let mut small = config.clone();
    small.ensemble_size = config.ensemble_size.min(VALIDATE_PATHS);
    small.experiment = Experiment::Bounds;
    let setup = prepare(&small, small.ensemble_size)?;
    let mut results = vec![
        suite("config_invariants", true, "all structural constraints hold".into()),
        covariance_suite(config)?,
        kernel_suite(config)?,
        semigroup_suite(&setup.basis)?,
    ];

    let c = fitted_kernel_constant(&setup.basis)?;
    results.push(suite(
        "heat_kernel_envelope",
        c.is_finite(),
        format!("fitted c = {}", num(c)),
    ));
    results.push(seed_suite(config));

    let rows = evaluate_bounds(&small, &setup)?;
    let s = OrderingSummary::of(&rows);
    results.push(suite(
        "ordering",
        s.findings() == 0,
        format!(
            "{} paths, {} blew up, lower violations {}, upper violations {} ({} attributed to discretization)",
            s.paths, s.blown_up, s.lower_violations, s.upper_violations, s.upper_discretization
        ),
    ));

    let again = evaluate_bounds(&small, &prepare(&small, small.ensemble_size)?)?;
    let identical = bounds_csv(&rows, setup.b) == bounds_csv(&again, setup.b);
    results.push(suite(
        "reproducibility",
        identical,
        "bounds CSV rebuilt from scratch".into(),
    ));

    let m = &config.model;
    if (m.m + m.n - m.q).abs() <= 1e-12 {
        let ui = upper_bound_inputs(
            m,
            &setup.basis,
            &InitialDatum::PhiMultiple(setup.b),
            config.eps0_fraction,
        )?;
        let mut worst: f64 = 0.0;
        let mut worst_gap: f64 = 0.0;
        for p in setup.paths.iter().take(5) {
            let r = comparison_ode(p, m, &setup.basis, ui.j0, ui.n_tilde, ComparisonRegime::Critical)?;
            worst = worst.max(r.max_relative_gap);
            let tau = blowup_core::bounds::tau_upper_critical(p, m, &setup.basis, &ui)?.printed;
            if r.singularity.is_finite() || tau.is_finite() {
                worst_gap = worst_gap.max((r.singularity - tau).abs() / p.grid.dt());
            }
        }
        results.push(suite(
            "comparison_ode",
            worst < 1e-6 && worst_gap <= 1.0,
            format!("largest relative gap {worst:.2e}, singularity offset {worst_gap:.2} steps"),
        ));
    }

    if config.ensemble_size >= blowup_core::probability::MIN_ENSEMBLE {
        let mut prob = config.clone();
        prob.ensemble_size = blowup_core::probability::MIN_ENSEMBLE;
        let psetup = prepare(&prob, prob.ensemble_size)?;
        let report = probability_report(&prob, &psetup)?;
        let in_range = report
            .rows
            .iter()
            .all(|r| r.analytic.is_nan() || (0.0..=1.0).contains(&r.analytic));
        results.push(suite(
            "probability_bounds_in_unit_interval",
            in_range,
            format!("{} analytic bounds evaluated", report.rows.len()),
        ));
    }

    let mut table = String::from("suite,passed,detail\n");
    for r in &results {
        writeln!(table, "{},{},\"{}\"", r.name, r.passed, r.detail.replace('"', "'")).expect("string write");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let summary = results
        .iter()
        .map(|r| {
            format!(
                "{:<36} {}  {}",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.detail
            )
        })
        .collect();
    Ok(RunOutcome {
        artifacts: vec![Artifact {
            name: "validate.csv".into(),
            contents: table.into_bytes(),
        }],
        seeds: setup.paths.iter().map(|p| p.seed).collect(),
        findings: failed,
        summary,
    })
}
