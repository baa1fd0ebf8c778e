//! Experiment orchestration: ensembles, per-path bounds, probability
//! confrontation and the validation suite.
//!
//! Workers compute immutable per-replicate records in parallel; a single
//! writer serialises them in replicate order, so outputs do not depend on
//! the worker count.

use std::fmt::Write as _;

use blowup_core::bounds::{
    a1_assemblies, b_admissibility, brownian_stopping_times, global_certificate_decay, global_certificate_horizon,
    lower_bound_inputs, minimal_b, tau_lower, tau_upper_critical, tau_upper_supercritical, upper_bound_inputs,
    CertificateReport, SemigroupWeights, UpperBound, UpperBoundInputs,
};
use blowup_core::fbm::{replicate_seed, sample_path, FbmPath};
use blowup_core::probability::{
    bessel_series_case2, density_thresholds, density_upper_bound, gamma_law_case1, judge, malliavin_lower_bound,
    mc_blowup_probability, BesselSeriesInputs, BoundSide, BoundVerdict, DensityBoundInputs, GammaLawInputs,
    LogArgument, MalliavinInputs, McEstimate, TailAssembly,
};
use blowup_core::rpde::{solve, write_snapshot_csv, InitialDatum, SolutionTrace, SolverControls, Verdict};
use blowup_core::spectral::{build_basis, fit_kernel_bound, DomainSpec, Point, SpectralBasis};
use blowup_core::{Error, Result};
use rayon::prelude::*;

use crate::config::{DatumChoice, Experiment, ExperimentConfig};
use crate::validate::run_validation;

/// One named output file held in memory until the writer flushes it.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: Vec<Artifact>,
    pub seeds: Vec<u64>,
    /// Falsification findings; nonzero fails a strict run.
    pub findings: usize,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

/// Number formatting shared by every CSV.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.10e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Shared per-run state: basis, ensemble and the chosen datum.
pub struct Setup {
    pub basis: SpectralBasis,
    pub paths: Vec<FbmPath>,
    pub running_sups: Vec<f64>,
    pub b: f64,
    pub kernel_c: f64,
}

pub fn running_sup(path: &FbmPath) -> f64 {
    path.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn sample_paths(config: &ExperimentConfig, count: usize) -> Result<Vec<FbmPath>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            sample_path(
                config.model.hurst,
                config.grid,
                replicate_seed(config.master_seed, i as u64),
                config.sampling,
            )
        })
        .collect()
}

fn kernel_points(domain: DomainSpec) -> Vec<Point> {
    match domain {
        DomainSpec::Interval { length, .. } => (1..10).map(|i| [length * i as f64 / 10.0, 0.0]).collect(),
        DomainSpec::Rectangle { lx, ly, .. } => (1..4)
            .flat_map(|i| (1..4).map(move |j| [lx * i as f64 / 4.0, ly * j as f64 / 4.0]))
            .collect(),
    }
}

/// Envelope constant of the heat kernel, fitted on log-spaced times.
pub fn fitted_kernel_constant(basis: &SpectralBasis) -> Result<f64> {
    let times: Vec<f64> = (0..20).map(|i| 0.01 * 200f64.powf(i as f64 / 19.0)).collect();
    Ok(fit_kernel_bound(basis, &times, &kernel_points(basis.domain().spec()))?.c)
}

pub fn prepare(config: &ExperimentConfig, count: usize) -> Result<Setup> {
    let basis = build_basis(config.domain, config.n_modes)?;
    let paths = sample_paths(config, count)?;
    let running_sups: Vec<f64> = paths.iter().map(running_sup).collect();
    let b = match config.datum {
        DatumChoice::Fixed(b) => b,
        DatumChoice::Certified { factor } => {
            let worst = running_sups.iter().cloned().fold(0.0, f64::max);
            factor * minimal_b(worst, &config.model, &basis)?
        }
    };
    let kernel_c = fitted_kernel_constant(&basis)?;
    Ok(Setup {
        basis,
        paths,
        running_sups,
        b,
        kernel_c,
    })
}

fn solve_path(
    config: &ExperimentConfig,
    basis: &SpectralBasis,
    b: f64,
    path: &FbmPath,
    ctl: &SolverControls,
) -> Result<SolutionTrace> {
    solve(&config.model, basis, &InitialDatum::PhiMultiple(b), path, ctl)
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    match config.experiment {
        Experiment::Simulate => run_simulate(config),
        Experiment::Bounds => run_bounds(config),
        Experiment::Probability => run_probability(config),
        Experiment::Validate => run_validation(config),
    }
}

// ---------------------------------------------------------------- simulate

fn run_simulate(config: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = prepare(config, config.ensemble_size)?;
    let traces: Vec<SolutionTrace> = setup
        .paths
        .par_iter()
        .map(|p| solve_path(config, &setup.basis, setup.b, p, &config.solver))
        .collect::<Result<_>>()?;
    let mut table = String::from("replicate,seed,b,verdict,tau_num,steps,clipped_nodes,min_undershoot,final_mass\n");
    let mut artifacts = Vec::new();
    for (i, (tr, p)) in traces.iter().zip(&setup.paths).enumerate() {
        writeln!(
            table,
            "{i},{},{},{},{},{},{},{},{}",
            p.seed,
            num(setup.b),
            tr.verdict.label(),
            opt_num(tr.verdict.time()),
            tr.steps,
            tr.clipped_nodes,
            num(tr.min_undershoot),
            num(*tr.mass.last().unwrap_or(&f64::NAN))
        )
        .expect("string write");
        let mut buf = Vec::new();
        tr.write_csv(&mut buf)?;
        artifacts.push(Artifact {
            name: format!("traces/trace_{i:04}.csv"),
            contents: buf,
        });
        let mut buf = Vec::new();
        p.write_csv(&mut buf)?;
        artifacts.push(Artifact {
            name: format!("paths/path_{i:04}.csv"),
            contents: buf,
        });
        for (k, (t, v)) in tr.snapshots.iter().enumerate() {
            let mut buf = Vec::new();
            write_snapshot_csv(&setup.basis, v, &mut buf)?;
            artifacts.push(Artifact {
                name: format!("snapshots/snap_{i:04}_{k:02}_t{t:.4}.csv"),
                contents: buf,
            });
        }
    }
    artifacts.insert(
        0,
        Artifact {
            name: "simulate.csv".into(),
            contents: table.into_bytes(),
        },
    );
    let blown = traces.iter().filter(|t| t.verdict.time().is_some()).count();
    Ok(RunOutcome {
        artifacts,
        seeds: setup.paths.iter().map(|p| p.seed).collect(),
        findings: 0,
        summary: vec![
            format!("b = {}", num(setup.b)),
            format!(
                "{blown} of {} replicates blew up before t = {}",
                traces.len(),
                config.solver.horizon
            ),
        ],
    })
}

// ---------------------------------------------------------------- bounds

/// Outcome of comparing a bound with the numerical blow-up time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Holds,
    /// Hypotheses not met on this path, or nothing to compare.
    NotApplicable,
    /// Violated on the base grid, resolved or halved by one refinement.
    Discretization,
    Violation,
}

impl Ordering {
    pub fn label(self) -> &'static str {
        match self {
            Ordering::Holds => "holds",
            Ordering::NotApplicable => "n/a",
            Ordering::Discretization => "discretization",
            Ordering::Violation => "violation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathBounds {
    pub replicate: usize,
    pub seed: u64,
    pub running_sup: f64,
    pub tau_lower: f64,
    /// Selected reading of the upper stopping time.
    pub tau_upper: f64,
    pub tau_upper_alt: f64,
    pub upper_diagnostic: Option<String>,
    pub sigma: Option<(f64, f64)>,
    pub verdict: Verdict,
    pub tau_num_refined: Option<f64>,
    pub horizon_certificate: CertificateReport,
    pub decay_certificate: Option<CertificateReport>,
    pub admissibility: [f64; 3],
    pub admissible: bool,
    pub lower: Ordering,
    pub upper: Ordering,
}

/// Shared, path-independent inputs of the bounds pipeline.
pub struct BoundsContext<'a> {
    pub config: &'a ExperimentConfig,
    pub basis: &'a SpectralBasis,
    pub refined: Option<SpectralBasis>,
    pub b: f64,
    pub kernel_c: f64,
    pub upper_inputs: UpperBoundInputs,
    pub critical: bool,
}

/// Refined solves halve the spacing and the reaction-step safety factor.
pub const REFINEMENT_FACTOR: usize = 2;
/// A refinement explains an upper violation when the excess shrinks below this fraction.
pub const REFINEMENT_SHRINK: f64 = 0.75;

impl<'a> BoundsContext<'a> {
    pub fn new(config: &'a ExperimentConfig, basis: &'a SpectralBasis, b: f64, kernel_c: f64) -> Result<Self> {
        let upper_inputs = upper_bound_inputs(
            &config.model,
            basis,
            &InitialDatum::PhiMultiple(b),
            config.eps0_fraction,
        )?;
        let refined = if config.refine_on_violation {
            Some(build_basis(config.domain.refined(REFINEMENT_FACTOR), config.n_modes)?)
        } else {
            None
        };
        let m = &config.model;
        Ok(BoundsContext {
            config,
            basis,
            refined,
            b,
            kernel_c,
            upper_inputs,
            critical: (m.m + m.n - m.q).abs() <= 1e-12,
        })
    }

    fn upper(&self, path: &FbmPath) -> Result<UpperBound> {
        let (m, b) = (&self.config.model, self.basis);
        if self.critical {
            tau_upper_critical(path, m, b, &self.upper_inputs)
        } else {
            tau_upper_supercritical(path, m, b, &self.upper_inputs)
        }
    }

    fn flipped(&self) -> bool {
        let v = &self.config.variants;
        if self.critical {
            v.critical_sign_flipped
        } else {
            v.supercritical_derived
        }
    }

    pub fn evaluate(&self, replicate: usize, path: &FbmPath) -> Result<PathBounds> {
        let cfg = self.config;
        let params = &cfg.model;
        let basis = self.basis;
        let runsup = running_sup(path);
        let f_sup = self.b * basis.phi_sup();
        let times = path.times();
        let weights = SemigroupWeights::spectral(basis, params.gamma, &times);
        let lower_inputs = lower_bound_inputs(params, basis.domain().volume(), f_sup)?;
        let tau_lower = tau_lower(path, params, &weights, &lower_inputs)?;
        let horizon_certificate = global_certificate_horizon(path, params, &weights, &lower_inputs)?;
        let decay_certificate =
            match global_certificate_decay(path, params, basis, self.kernel_c, self.b, lower_inputs.m_const) {
                Ok(r) => Some(r),
                Err(Error::Refused(_)) => None,
                Err(e) => return Err(e),
            };
        let adm = b_admissibility(self.b, runsup, params, basis)?;
        let ub = self.upper(path)?;
        let (tau_upper, tau_upper_alt) = if self.flipped() {
            (ub.variant, ub.printed)
        } else {
            (ub.printed, ub.variant)
        };
        let sigma = if params.hurst.is_brownian() {
            let a1 = if self.critical {
                None
            } else {
                let (printed, substituted) = a1_assemblies(params, basis, &self.upper_inputs)?;
                Some(if cfg.variants.a1_substituted {
                    substituted
                } else {
                    printed
                })
            };
            let s = brownian_stopping_times(path, params, basis, lower_inputs.m_const, f_sup, a1.unwrap_or(f64::NAN))?;
            Some((
                s.sigma_star,
                if a1.is_some_and(|a| a > 0.0) {
                    s.sigma_star_star
                } else {
                    f64::NAN
                },
            ))
        } else {
            None
        };

        let trace = solve_path(cfg, basis, self.b, path, &cfg.solver)?;
        let t_num = trace.verdict.time();
        let lower = match t_num {
            Some(t) if tau_lower > t => Ordering::Violation,
            _ => Ordering::Holds,
        };
        let horizon = cfg.solver.horizon;
        let mut tau_num_refined = None;
        let upper = if !adm.holds {
            Ordering::NotApplicable
        } else if tau_upper.is_finite() && tau_upper <= horizon {
            let excess = t_num.map_or(horizon - tau_upper, |t| t - tau_upper);
            if excess <= 0.0 {
                Ordering::Holds
            } else if let Some(fine) = &self.refined {
                let ctl = SolverControls {
                    safety: cfg.solver.safety / REFINEMENT_FACTOR as f64,
                    ..cfg.solver.clone()
                };
                let tr = solve_path(cfg, fine, self.b, path, &ctl)?;
                tau_num_refined = Some(tr.verdict.time().unwrap_or(f64::INFINITY));
                let refined_excess = tr.verdict.time().map_or(f64::INFINITY, |t| t - tau_upper);
                if refined_excess <= 0.0 || refined_excess <= REFINEMENT_SHRINK * excess {
                    Ordering::Discretization
                } else {
                    Ordering::Violation
                }
            } else {
                Ordering::Violation
            }
        } else if t_num.is_some() {
            Ordering::Holds
        } else {
            Ordering::NotApplicable
        };
        Ok(PathBounds {
            replicate,
            seed: path.seed,
            running_sup: runsup,
            tau_lower,
            tau_upper,
            tau_upper_alt,
            upper_diagnostic: ub.diagnostic,
            sigma,
            verdict: trace.verdict,
            tau_num_refined,
            horizon_certificate,
            decay_certificate,
            admissibility: adm.margins,
            admissible: adm.holds,
            lower,
            upper,
        })
    }
}

pub const BOUNDS_HEADER: &str =
    "replicate,seed,b,running_sup,tau_lower,tau_upper,tau_upper_alt,sigma_star,sigma_star_star,\
tau_num,verdict,tau_num_refined,horizon_certificate,horizon_margin,decay_certificate,decay_margin,\
adm_margin_1,adm_margin_2,adm_margin_3,admissible,lower_ordering,upper_ordering";

fn certificate_label(c: &CertificateReport) -> &'static str {
    if c.granted {
        "granted"
    } else {
        "denied"
    }
}

pub fn bounds_csv(rows: &[PathBounds], b: f64) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for r in rows {
        let (s1, s2) = r.sigma.map_or((None, None), |(a, c)| (Some(a), Some(c)));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.seed,
            num(b),
            num(r.running_sup),
            num(r.tau_lower),
            num(r.tau_upper),
            num(r.tau_upper_alt),
            opt_num(s1),
            opt_num(s2),
            opt_num(r.verdict.time()),
            r.verdict.label(),
            opt_num(r.tau_num_refined),
            certificate_label(&r.horizon_certificate),
            num(r.horizon_certificate.margin),
            r.decay_certificate.as_ref().map_or("refused", certificate_label),
            opt_num(r.decay_certificate.as_ref().map(|c| c.margin)),
            num(r.admissibility[0]),
            num(r.admissibility[1]),
            num(r.admissibility[2]),
            r.admissible,
            r.lower.label(),
            r.upper.label(),
        )
        .expect("string write");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrderingSummary {
    pub paths: usize,
    pub blown_up: usize,
    pub lower_holds: usize,
    pub lower_violations: usize,
    pub upper_checked: usize,
    pub upper_holds: usize,
    pub upper_discretization: usize,
    pub upper_violations: usize,
    pub admissible: usize,
}

impl OrderingSummary {
    pub fn of(rows: &[PathBounds]) -> Self {
        let mut s = OrderingSummary {
            paths: rows.len(),
            ..Default::default()
        };
        for r in rows {
            s.blown_up += r.verdict.time().is_some() as usize;
            s.admissible += r.admissible as usize;
            match r.lower {
                Ordering::Holds => s.lower_holds += 1,
                Ordering::Violation => s.lower_violations += 1,
                _ => {}
            }
            match r.upper {
                Ordering::Holds => s.upper_holds += 1,
                Ordering::Discretization => s.upper_discretization += 1,
                Ordering::Violation => s.upper_violations += 1,
                Ordering::NotApplicable => continue,
            }
            s.upper_checked += 1;
        }
        s
    }

    pub fn findings(&self) -> usize {
        self.lower_violations + self.upper_violations
    }

    pub fn csv(&self) -> String {
        let rows = [
            ("paths", self.paths),
            ("blown_up", self.blown_up),
            ("admissible", self.admissible),
            ("lower_holds", self.lower_holds),
            ("lower_violations", self.lower_violations),
            ("upper_checked", self.upper_checked),
            ("upper_holds", self.upper_holds),
            ("upper_discretization", self.upper_discretization),
            ("upper_violations", self.upper_violations),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            writeln!(out, "{k},{v}").expect("string write");
        }
        out
    }
}

pub fn evaluate_bounds(config: &ExperimentConfig, setup: &Setup) -> Result<Vec<PathBounds>> {
    let ctx = BoundsContext::new(config, &setup.basis, setup.b, setup.kernel_c)?;
    setup
        .paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| ctx.evaluate(i, p))
        .collect()
}

fn run_bounds(config: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = prepare(config, config.ensemble_size)?;
    let rows = evaluate_bounds(config, &setup)?;
    let summary = OrderingSummary::of(&rows);
    let mut notes = vec![
        format!(
            "b = {}, fitted kernel constant c = {}",
            num(setup.b),
            num(setup.kernel_c)
        ),
        format!(
            "{} paths, {} blew up; lower ordering violations {}; upper checked {}, discretization {}, violations {}",
            summary.paths,
            summary.blown_up,
            summary.lower_violations,
            summary.upper_checked,
            summary.upper_discretization,
            summary.upper_violations
        ),
    ];
    if let Some(d) = rows.iter().find_map(|r| r.upper_diagnostic.clone()) {
        notes.push(format!("upper bound diagnostic: {d}"));
    }
    Ok(RunOutcome {
        artifacts: vec![
            Artifact {
                name: "bounds.csv".into(),
                contents: bounds_csv(&rows, setup.b).into_bytes(),
            },
            Artifact {
                name: "bounds_summary.csv".into(),
                contents: summary.csv().into_bytes(),
            },
        ],
        seeds: setup.paths.iter().map(|p| p.seed).collect(),
        findings: summary.findings(),
        summary: notes,
    })
}

// ---------------------------------------------------------------- probability

/// Whether a reading is a printed formula with a known inconsistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reading {
    /// Printed form with a documented inconsistency.
    Printed,
    /// The consistent (possibly re-derived) form.
    Consistent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityRow {
    pub bound_name: String,
    pub side: BoundSide,
    pub analytic: f64,
    pub verdict: BoundVerdict,
    pub variant_flags: Vec<&'static str>,
    pub reading: Reading,
    pub selected: bool,
}

impl ProbabilityRow {
    /// A violation not explained by a printed-formula reading.
    pub fn is_finding(&self) -> bool {
        self.reading == Reading::Consistent && self.verdict == BoundVerdict::Violation
    }
}

pub struct ProbabilityReport {
    pub mc: McEstimate,
    pub rows: Vec<ProbabilityRow>,
}

/// Analytic bounds for the configured regime, judged against the MC estimate.
pub fn probability_rows(
    config: &ExperimentConfig,
    basis: &SpectralBasis,
    paths: &[FbmPath],
    b: f64,
    mc: &McEstimate,
) -> Result<Vec<ProbabilityRow>> {
    let p = &config.model;
    let v = &config.variants;
    let lam1 = basis.lambda1();
    let critical = (p.m + p.n - p.q).abs() <= 1e-12;
    let ui = upper_bound_inputs(p, basis, &InitialDatum::PhiMultiple(b), config.eps0_fraction)?;
    let mut rows = Vec::new();
    let mut push = |name: &str, side, value: Result<f64>, flags: Vec<&'static str>, reading, selected| {
        let analytic = value.unwrap_or(f64::NAN);
        rows.push(ProbabilityRow {
            bound_name: name.to_string(),
            side,
            analytic,
            verdict: judge(analytic, side, mc),
            variant_flags: flags,
            reading,
            selected,
        });
    };
    if p.hurst.is_brownian() {
        let big_lambda = p.brownian_damping();
        if critical {
            let g = GammaLawInputs::assemble(lam1, big_lambda, p.eta, p.q, ui.n_tilde, ui.j0);
            push(
                "gamma_law_case1",
                BoundSide::Lower,
                gamma_law_case1(g),
                vec![],
                Reading::Consistent,
                true,
            );
        } else {
            let (printed, substituted) = a1_assemblies(p, basis, &ui)?;
            for (a1, flags, reading, sel) in [
                (printed, vec![], Reading::Printed, !v.a1_substituted),
                (
                    substituted,
                    vec!["a1_substituted"],
                    Reading::Consistent,
                    v.a1_substituted,
                ),
            ] {
                let inputs = BesselSeriesInputs::assemble(lam1, big_lambda, p.eta, p.q, a1);
                push(
                    "bessel_series_case2",
                    BoundSide::Lower,
                    bessel_series_case2(&inputs).map(|r| r.value),
                    flags,
                    reading,
                    sel,
                );
            }
        }
        let li = lower_bound_inputs(p, basis.domain().volume(), b * basis.phi_sup())?;
        let th = density_thresholds(li.m_const, p.m + p.n, p.q, li.f_sup, lam1, big_lambda);
        for (n1, flags, reading, sel) in [
            (th.printed, vec![], Reading::Printed, !v.density_derived),
            (
                th.derived,
                vec!["density_derived"],
                Reading::Consistent,
                v.density_derived,
            ),
        ] {
            let inputs = DensityBoundInputs::assemble(big_lambda, p.eta, p.q, p.m + p.n, n1);
            push(
                "density_upper_bound",
                BoundSide::Upper,
                density_upper_bound(inputs).map(|r| r.value),
                flags,
                reading,
                sel,
            );
        }
    } else if critical {
        let inputs = MalliavinInputs {
            lambda1: lam1,
            gamma: p.gamma,
            eta: p.eta,
            mu: p.q,
            n_tilde: ui.n_tilde,
            j0: ui.j0,
        };
        let report = malliavin_lower_bound(paths, inputs, config.malliavin_alpha);
        match report {
            Ok(r) if r.almost_sure => push(
                "malliavin_lower_bound",
                BoundSide::Lower,
                Ok(1.0),
                vec![],
                Reading::Consistent,
                true,
            ),
            Ok(r) => {
                for var in r.variants {
                    let threshold_arg = var.log_argument == LogArgument::Threshold;
                    let divide = var.assembly == TailAssembly::Divide;
                    let mut flags = Vec::new();
                    if threshold_arg {
                        flags.push("malliavin_threshold_argument");
                    }
                    if divide {
                        flags.push("malliavin_divide");
                    }
                    if var.exact_m_h {
                        flags.push("malliavin_exact_m_h");
                    }
                    let selected = threshold_arg == v.malliavin_threshold_argument
                        && divide == v.malliavin_divide
                        && var.exact_m_h == v.malliavin_exact_m_h;
                    let reading = if divide && var.exact_m_h {
                        Reading::Consistent
                    } else {
                        Reading::Printed
                    };
                    push(
                        "malliavin_lower_bound",
                        BoundSide::Lower,
                        Ok(var.bound),
                        flags,
                        reading,
                        selected,
                    );
                }
            }
            Err(e) => push(
                "malliavin_lower_bound",
                BoundSide::Lower,
                Err(e),
                vec![],
                Reading::Consistent,
                true,
            ),
        }
    }
    Ok(rows)
}

pub const PROBABILITY_HEADER: &str =
    "bound_name,analytic_value,mc_estimate,ci_low,ci_high,verdict,variant_flags,side,reading,selected";

pub fn probability_csv(report: &ProbabilityReport) -> String {
    let mc = &report.mc;
    let mut out = String::from(PROBABILITY_HEADER);
    out.push('\n');
    writeln!(
        out,
        "mc_blowup_probability,,{},{},{},,,,,true",
        num(mc.estimate),
        num(mc.ci_low),
        num(mc.ci_high)
    )
    .expect("string write");
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.bound_name,
            num(r.analytic),
            num(mc.estimate),
            num(mc.ci_low),
            num(mc.ci_high),
            r.verdict.label(),
            r.variant_flags.join("+"),
            match r.side {
                BoundSide::Lower => "lower",
                BoundSide::Upper => "upper",
            },
            match r.reading {
                Reading::Printed => "printed",
                Reading::Consistent => "consistent",
            },
            r.selected
        )
        .expect("string write");
    }
    out
}

pub fn probability_report(config: &ExperimentConfig, setup: &Setup) -> Result<ProbabilityReport> {
    let traces: Vec<SolutionTrace> = setup
        .paths
        .par_iter()
        .map(|p| solve_path(config, &setup.basis, setup.b, p, &config.solver))
        .collect::<Result<_>>()?;
    let mc = mc_blowup_probability(&traces)?;
    let rows = probability_rows(config, &setup.basis, &setup.paths, setup.b, &mc)?;
    Ok(ProbabilityReport { mc, rows })
}

fn run_probability(config: &ExperimentConfig) -> Result<RunOutcome> {
    let setup = prepare(config, config.ensemble_size)?;
    let report = probability_report(config, &setup)?;
    let findings = report.rows.iter().filter(|r| r.is_finding()).count();
    let mc = &report.mc;
    let mut summary = vec![format!(
        "MC blow-up probability {} (95% CI [{}, {}]), censored fraction {}",
        num(mc.estimate),
        num(mc.ci_low),
        num(mc.ci_high),
        num(mc.censored_fraction)
    )];
    for r in &report.rows {
        summary.push(format!(
            "{} [{}] = {} -> {}",
            r.bound_name,
            r.variant_flags.join("+"),
            num(r.analytic),
            r.verdict.label()
        ));
    }
    Ok(RunOutcome {
        artifacts: vec![Artifact {
            name: "probability.csv".into(),
            contents: probability_csv(&report).into_bytes(),
        }],
        seeds: setup.paths.iter().map(|p| p.seed).collect(),
        findings,
        summary,
    })
}
