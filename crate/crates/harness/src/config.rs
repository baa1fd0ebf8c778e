//! Flat key/value experiment configuration.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! produce warnings so older binaries accept newer files.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use blowup_core::fbm::{Hurst, SamplingMethod, TimeGrid};
use blowup_core::rpde::{ModelParams, SolverControls};
use blowup_core::spectral::DomainSpec;
use thiserror::Error;

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Bounds,
    Probability,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Bounds => "bounds",
            Experiment::Probability => "probability",
            Experiment::Validate => "validate",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Experiment::Simulate),
            "bounds" => Some(Experiment::Bounds),
            "probability" => Some(Experiment::Probability),
            "validate" => Some(Experiment::Validate),
            _ => None,
        }
    }
}

/// How the initial datum b φ is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DatumChoice {
    /// A fixed multiple of φ.
    Fixed(f64),
    /// `factor` times the smallest admissible b over the ensemble's running sup.
    Certified { factor: f64 },
}

/// Alternative readings of printed formulas. Both readings are always
/// computed; a flag selects which one is reported as primary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VariantFlags {
    /// Critical upper stopping time with the time exponent sign flipped.
    pub critical_sign_flipped: bool,
    /// Supercritical upper stopping time with the re-derived threshold.
    pub supercritical_derived: bool,
    /// Series threshold a₁ with λ₁+Λ in place of −λ₁+γ.
    pub a1_substituted: bool,
    /// Density-bound threshold with Λ(m+n−1) in place of (λ₁+Λ)(q−1).
    pub density_derived: bool,
    /// Malliavin tail assembled by dividing by M_H.
    pub malliavin_divide: bool,
    /// Malliavin log argument taken as the crossing threshold.
    pub malliavin_threshold_argument: bool,
    /// Malliavin bound with the exact supremum of the kernel bound.
    pub malliavin_exact_m_h: bool,
}

pub const VARIANT_NAMES: [&str; 7] = [
    "critical_sign_flipped",
    "supercritical_derived",
    "a1_substituted",
    "density_derived",
    "malliavin_divide",
    "malliavin_threshold_argument",
    "malliavin_exact_m_h",
];

impl VariantFlags {
    fn set(&mut self, name: &str) -> bool {
        let slot = match name {
            "critical_sign_flipped" => &mut self.critical_sign_flipped,
            "supercritical_derived" => &mut self.supercritical_derived,
            "a1_substituted" => &mut self.a1_substituted,
            "density_derived" => &mut self.density_derived,
            "malliavin_divide" => &mut self.malliavin_divide,
            "malliavin_threshold_argument" => &mut self.malliavin_threshold_argument,
            "malliavin_exact_m_h" => &mut self.malliavin_exact_m_h,
            _ => return false,
        };
        *slot = true;
        true
    }

    pub fn active(&self) -> Vec<&'static str> {
        let on = [
            self.critical_sign_flipped,
            self.supercritical_derived,
            self.a1_substituted,
            self.density_derived,
            self.malliavin_divide,
            self.malliavin_threshold_argument,
            self.malliavin_exact_m_h,
        ];
        VARIANT_NAMES
            .iter()
            .zip(on)
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub ensemble_size: usize,
    pub master_seed: u64,
    pub model: ModelParams,
    pub domain: DomainSpec,
    pub n_modes: usize,
    pub grid: TimeGrid,
    pub sampling: SamplingMethod,
    pub datum: DatumChoice,
    pub solver: SolverControls,
    pub eps0_fraction: f64,
    pub malliavin_alpha: f64,
    /// Re-solve on a refined grid when the numerical time exceeds the upper bound.
    pub refine_on_violation: bool,
    pub variants: VariantFlags,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseLocation {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("parse error at line {}, column {}: {message}", .location.line, .location.column)]
    Parse { location: ParseLocation, message: String },
    #[error("{} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Invalid(Vec<String>),
}

/// A validated config plus non-fatal diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

const KNOWN_KEYS: [&str; 34] = [
    "experiment",
    "output_dir",
    "ensemble_size",
    "master_seed",
    "hurst",
    "t_max",
    "n_steps",
    "sampling",
    "domain",
    "length",
    "width",
    "cells",
    "cells_y",
    "modes",
    "gamma",
    "k",
    "delta",
    "eta",
    "p",
    "q",
    "m",
    "n",
    "datum",
    "b",
    "b_factor",
    "cfl",
    "step_safety",
    "v_max",
    "dt_min",
    "output_dt",
    "snapshots",
    "eps0_fraction",
    "malliavin_alpha",
    "variants",
];
const EXTRA_KEYS: [&str; 1] = ["refine_on_violation"];

struct Reader<'a> {
    table: &'a toml::Table,
    errors: Vec<String>,
}

impl Reader<'_> {
    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.table.get(key) {
            None => default,
            Some(toml::Value::Float(v)) => *v,
            Some(toml::Value::Integer(v)) => *v as f64,
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be a number, found {}", other.type_str()));
                default
            }
        }
    }

    fn int(&mut self, key: &str, default: i64) -> i64 {
        match self.table.get(key) {
            None => default,
            Some(toml::Value::Integer(v)) => *v,
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be an integer, found {}", other.type_str()));
                default
            }
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        let v = self.int(key, default as i64);
        if v < min as i64 {
            self.errors.push(format!("`{key}` must be ≥ {min}, got {v}"));
            return default.max(min);
        }
        v as usize
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        match self.table.get(key) {
            None => default.to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be a string, found {}", other.type_str()));
                default.to_string()
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.table.get(key) {
            None => default,
            Some(toml::Value::Boolean(b)) => *b,
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be a boolean, found {}", other.type_str()));
                default
            }
        }
    }

    fn list(&mut self, key: &str) -> Vec<toml::Value> {
        match self.table.get(key) {
            None => Vec::new(),
            Some(toml::Value::Array(a)) => a.clone(),
            Some(other) => {
                self.errors
                    .push(format!("`{key}` must be an array, found {}", other.type_str()));
                Vec::new()
            }
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> f64 {
        let v = self.float(key, default);
        if !(v > 0.0) || !v.is_finite() {
            self.errors
                .push(format!("`{key}` must be positive and finite, got {v}"));
            return default;
        }
        v
    }
}

fn location(src: &str, offset: usize) -> ParseLocation {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ParseLocation { line, column }
}

/// Parses and validates a config document, collecting every violation.
pub fn parse_config(src: &str) -> Result<LoadedConfig, ConfigError> {
    let table: toml::Table = src.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        location: location(src, e.span().map_or(0, |s| s.start)),
        message: e.message().to_string(),
    })?;
    let mut warnings = Vec::new();
    for (key, value) in &table {
        if value.is_table() {
            warnings.push(format!("nested table `{key}` ignored; the schema is flat"));
        } else if !KNOWN_KEYS.contains(&key.as_str()) && !EXTRA_KEYS.contains(&key.as_str()) {
            warnings.push(format!("unknown key `{key}` ignored"));
        }
    }
    let mut r = Reader {
        table: &table,
        errors: Vec::new(),
    };

    let experiment_name = r.string("experiment", "validate");
    let experiment = Experiment::parse(&experiment_name).unwrap_or_else(|| {
        r.errors.push(format!(
            "`experiment` must be one of simulate, bounds, probability, validate; got `{experiment_name}`"
        ));
        Experiment::Validate
    });
    let output_dir = PathBuf::from(r.string("output_dir", "out"));
    let ensemble_size = r.count("ensemble_size", 100, 1);
    let master_seed = match table.get("master_seed") {
        Some(toml::Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(toml::Value::String(s)) => s.parse::<u64>().unwrap_or_else(|_| {
            r.errors
                .push(format!("`master_seed` string must hold a u64, got `{s}`"));
            0
        }),
        None => 20_240_601,
        Some(other) => {
            r.errors.push(format!(
                "`master_seed` must be a non-negative integer (or a decimal string for values ≥ 2^63), found {}",
                other
            ));
            0
        }
    };

    let hurst_value = r.float("hurst", 0.75);
    let hurst = Hurst::new(hurst_value).unwrap_or_else(|e| {
        r.errors.push(format!("`hurst`: {e}"));
        Hurst::new(0.75).expect("default Hurst index is valid")
    });
    let t_max = r.positive("t_max", 0.2);
    let n_steps = r.count("n_steps", 2000, 1);
    let grid = TimeGrid::new(t_max, n_steps).unwrap_or_else(|e| {
        r.errors.push(format!("time grid: {e}"));
        TimeGrid::new(0.2, 2000).expect("default grid is valid")
    });
    let sampling = match r.string("sampling", "circulant").as_str() {
        "circulant" => SamplingMethod::CirculantEmbedding,
        "cholesky" => SamplingMethod::Cholesky,
        other => {
            r.errors
                .push(format!("`sampling` must be circulant or cholesky, got `{other}`"));
            SamplingMethod::CirculantEmbedding
        }
    };

    let length = r.positive("length", 4.0);
    let cells = r.count("cells", 64, 2);
    let domain = match r.string("domain", "interval").as_str() {
        "interval" => DomainSpec::interval(length, cells),
        "rectangle" => {
            let width = r.positive("width", 1.0);
            let cells_y = r.count("cells_y", 16, 2);
            DomainSpec::rectangle(length, width, cells, cells_y)
        }
        other => {
            r.errors
                .push(format!("`domain` must be interval or rectangle, got `{other}`"));
            DomainSpec::interval(length, cells)
        }
    };
    if let Err(e) = domain.validate() {
        r.errors.push(format!("domain: {e}"));
    }
    let n_modes = r.count("modes", 30, 2);

    let model = ModelParams {
        gamma: r.float("gamma", 0.0),
        k: r.float("k", 1.0),
        delta: r.float("delta", 1.0),
        eta: r.float("eta", 0.5),
        p: r.float("p", 1.5),
        q: r.float("q", 2.0),
        m: r.float("m", 0.0),
        n: r.float("n", 2.0),
        hurst,
    };
    r.errors
        .extend(model.violations().into_iter().map(|v| format!("model: {v}")));

    let datum = match r.string("datum", "certified").as_str() {
        "certified" => {
            let factor = r.float("b_factor", 1.01);
            if !(factor >= 1.0) || !factor.is_finite() {
                r.errors.push(format!("`b_factor` must be ≥ 1, got {factor}"));
            }
            if !(model.q > model.p) {
                r.errors
                    .push("certified datum needs q > p (admissibility is vacuous otherwise)".to_string());
            }
            DatumChoice::Certified { factor }
        }
        "phi" => DatumChoice::Fixed(r.positive("b", 4.0)),
        other => {
            r.errors
                .push(format!("`datum` must be certified or phi, got `{other}`"));
            DatumChoice::Certified { factor: 1.01 }
        }
    };

    let defaults = SolverControls::default();
    let mut snapshot_times = Vec::new();
    for v in r.list("snapshots") {
        match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
            Some(t) if (0.0..=t_max).contains(&t) => snapshot_times.push(t),
            _ => r
                .errors
                .push(format!("`snapshots` entries must be times in [0, t_max], got {v}")),
        }
    }
    let output_dt = table.get("output_dt").map(|_| r.positive("output_dt", grid.dt()));
    let solver = SolverControls {
        cfl: r.positive("cfl", defaults.cfl),
        safety: r.positive("step_safety", defaults.safety),
        v_max: r.positive("v_max", defaults.v_max),
        dt_min: r.positive("dt_min", defaults.dt_min),
        horizon: t_max,
        output_dt,
        record_states: false,
        snapshot_times,
    };
    if solver.cfl > 0.5 {
        r.errors.push(format!(
            "`cfl` must be ≤ 0.5 for explicit stability, got {}",
            solver.cfl
        ));
    }

    let eps0_fraction = r.float("eps0_fraction", blowup_core::bounds::EPS0_FRACTION);
    if !(eps0_fraction > 0.0 && eps0_fraction < 1.0) {
        r.errors
            .push(format!("`eps0_fraction` must lie in (0, 1), got {eps0_fraction}"));
    }
    let malliavin_alpha = r.float("malliavin_alpha", 1.0);
    if !(malliavin_alpha > hurst.value()) {
        r.errors.push(format!(
            "`malliavin_alpha` must exceed the Hurst index ({}), got {malliavin_alpha}",
            hurst.value()
        ));
    }
    let refine_on_violation = r.boolean("refine_on_violation", true);

    let mut variants = VariantFlags::default();
    let mut seen = BTreeSet::new();
    for v in r.list("variants") {
        match v.as_str() {
            Some(name) if variants.set(name) => {
                seen.insert(name.to_string());
            }
            _ => r.errors.push(format!(
                "`variants` entries must be one of {}; got {v}",
                VARIANT_NAMES.join(", ")
            )),
        }
    }

    if experiment == Experiment::Probability && ensemble_size < blowup_core::probability::MIN_ENSEMBLE {
        r.errors.push(format!(
            "probability experiment needs ensemble_size ≥ {}, got {ensemble_size}",
            blowup_core::probability::MIN_ENSEMBLE
        ));
    }

    if !r.errors.is_empty() {
        return Err(ConfigError::Invalid(r.errors));
    }
    Ok(LoadedConfig {
        config: ExperimentConfig {
            experiment,
            output_dir,
            ensemble_size,
            master_seed,
            model,
            domain,
            n_modes,
            grid,
            sampling,
            datum,
            solver,
            eps0_fraction,
            malliavin_alpha,
            refine_on_violation,
            variants,
        },
        warnings,
    })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&src)
}

impl ExperimentConfig {
    /// Replaces the master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    /// Sets the horizon, keeping the path step fixed.
    pub fn with_horizon(mut self, horizon: f64) -> Result<Self, ConfigError> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ConfigError::Invalid(vec![format!(
                "horizon must be positive, got {horizon}"
            )]));
        }
        let steps = (horizon / self.grid.dt()).round().max(1.0) as usize;
        self.grid = TimeGrid::new(horizon, steps).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
        self.solver.horizon = horizon;
        self.solver.snapshot_times.retain(|&t| t <= horizon);
        Ok(self)
    }

    /// Fully resolved settings as sorted `key = value` lines; hashed into the ledger.
    pub fn canonical(&self) -> String {
        let m = &self.model;
        let mut lines = vec![
            format!("experiment = \"{}\"", self.experiment.name()),
            format!("output_dir = \"{}\"", self.output_dir.display()),
            format!("ensemble_size = {}", self.ensemble_size),
            format!("master_seed = \"{}\"", self.master_seed),
            format!("hurst = {:?}", m.hurst.value()),
            format!("t_max = {:?}", self.grid.t_max()),
            format!("n_steps = {}", self.grid.n_steps()),
            format!(
                "sampling = \"{}\"",
                match self.sampling {
                    SamplingMethod::CirculantEmbedding => "circulant",
                    SamplingMethod::Cholesky => "cholesky",
                }
            ),
            format!("modes = {}", self.n_modes),
            format!("gamma = {:?}", m.gamma),
            format!("k = {:?}", m.k),
            format!("delta = {:?}", m.delta),
            format!("eta = {:?}", m.eta),
            format!("p = {:?}", m.p),
            format!("q = {:?}", m.q),
            format!("m = {:?}", m.m),
            format!("n = {:?}", m.n),
            format!("cfl = {:?}", self.solver.cfl),
            format!("step_safety = {:?}", self.solver.safety),
            format!("v_max = {:?}", self.solver.v_max),
            format!("dt_min = {:?}", self.solver.dt_min),
            format!("snapshots = {:?}", self.solver.snapshot_times),
            format!("eps0_fraction = {:?}", self.eps0_fraction),
            format!("malliavin_alpha = {:?}", self.malliavin_alpha),
            format!("refine_on_violation = {}", self.refine_on_violation),
            format!("variants = {:?}", self.variants.active()),
        ];
        if let Some(dt) = self.solver.output_dt {
            lines.push(format!("output_dt = {dt:?}"));
        }
        match self.domain {
            DomainSpec::Interval { length, n_cells } => {
                lines.push("domain = \"interval\"".into());
                lines.push(format!("length = {length:?}"));
                lines.push(format!("cells = {n_cells}"));
            }
            DomainSpec::Rectangle { lx, ly, nx, ny } => {
                lines.push("domain = \"rectangle\"".into());
                lines.push(format!("length = {lx:?}"));
                lines.push(format!("width = {ly:?}"));
                lines.push(format!("cells = {nx}"));
                lines.push(format!("cells_y = {ny}"));
            }
        }
        match self.datum {
            DatumChoice::Fixed(b) => {
                lines.push("datum = \"phi\"".into());
                lines.push(format!("b = {b:?}"));
            }
            DatumChoice::Certified { factor } => {
                lines.push("datum = \"certified\"".into());
                lines.push(format!("b_factor = {factor:?}"));
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}
