//! Method-of-lines solver for the transformed random nonlocal equation
//!
//! ∂v/∂t = (Δ + γ − s)v + e^{(q−1)ηB} ∫v^q − k e^{(p−1)ηB} v^p
//!         + δ e^{(m+n−1)ηB} v^m ∫v^n,
//!
//! with homogeneous Dirichlet data, where s = η²/2 for Brownian noise and
//! zero otherwise. The original unknown is recovered as u = e^{ηB} v.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fbm::{FbmPath, Hurst};
use crate::spectral::SpectralBasis;

/// Coefficients and exponents of the equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub gamma: f64,
    pub k: f64,
    pub delta: f64,
    pub eta: f64,
    pub p: f64,
    pub q: f64,
    pub m: f64,
    pub n: f64,
    pub hurst: Hurst,
}

impl ModelParams {
    /// Every violated structural constraint, by name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let finite = [self.gamma, self.k, self.delta, self.eta, self.p, self.q, self.m, self.n];
        if finite.iter().any(|v| !v.is_finite()) {
            out.push("all coefficients finite".to_string());
        }
        if !(self.p > 1.0 && self.q > 1.0 && self.n > 1.0) {
            out.push("p,q,n>1".to_string());
        }
        if !(self.m >= 0.0) {
            out.push("m ≥ 0".to_string());
        }
        if !(self.m + self.n >= self.q && self.q >= self.p) {
            out.push("m+n ≥ q ≥ p > 1".to_string());
        }
        if !(self.k > 0.0) {
            out.push("k > 0".to_string());
        }
        if !(self.delta >= 0.0) {
            out.push("δ ≥ 0".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("violated constraints: {}", v.join("; "))))
        }
    }

    /// Itô correction s = η²/2 for Brownian noise, zero for H > ½.
    pub fn ito_shift(&self) -> f64 {
        if self.hurst.is_brownian() {
            0.5 * self.eta * self.eta
        } else {
            0.0
        }
    }

    /// Λ = η²/2 − γ, the effective damping of the Brownian case.
    pub fn brownian_damping(&self) -> f64 {
        0.5 * self.eta * self.eta - self.gamma
    }

    pub fn critical_exponent_gap(&self) -> f64 {
        self.m + self.n - self.q
    }
}

/// Initial condition of the transformed problem.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// b φ with φ the unit-integral principal eigenfunction.
    PhiMultiple(f64),
    /// Explicit node values.
    Nodes(Vec<f64>),
}

impl InitialDatum {
    pub fn materialize(&self, basis: &SpectralBasis) -> Result<Vec<f64>> {
        let dom = basis.domain();
        let v = match self {
            InitialDatum::PhiMultiple(b) => {
                if !(*b > 0.0) || !b.is_finite() {
                    return Err(Error::param("b", format!("multiple of φ must be positive, got {b}")));
                }
                basis.phi().iter().map(|p| b * p).collect::<Vec<_>>()
            }
            InitialDatum::Nodes(v) => {
                if v.len() != dom.n_nodes() {
                    return Err(Error::param(
                        "datum",
                        format!("expected {} node values, got {}", dom.n_nodes(), v.len()),
                    ));
                }
                v.clone()
            }
        };
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::param("datum", "must be finite and non-negative"));
        }
        if (0..v.len()).any(|i| dom.is_boundary(i) && v[i] != 0.0) {
            return Err(Error::param("datum", "must vanish on the boundary"));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::param("datum", "must not vanish identically"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverControls {
    /// Fraction of the explicit diffusion stability limit.
    pub cfl: f64,
    /// Bound on (reaction stiffness) × dt.
    pub safety: f64,
    /// Sup-norm level declared as blow-up.
    pub v_max: f64,
    /// Smallest admissible step before declaring step collapse.
    pub dt_min: f64,
    pub horizon: f64,
    /// Output spacing; defaults to the path grid spacing.
    pub output_dt: Option<f64>,
    /// Keep full node vectors at every output time.
    pub record_states: bool,
    pub snapshot_times: Vec<f64>,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            cfl: 0.4,
            safety: 0.02,
            v_max: 1e8,
            dt_min: 1e-12,
            horizon: 1.0,
            output_dt: None,
            record_states: false,
            snapshot_times: Vec::new(),
        }
    }
}

/// Largest ratio of path spacing to output spacing accepted.
pub const MAX_PATH_COARSENING: f64 = 4.0;
/// Negative undershoots down to this size are rounding and clipped silently.
pub const CLIP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    BlewUp { time: f64 },
    StepCollapse { time: f64 },
    GlobalUntilHorizon,
}

impl Verdict {
    /// Time of blow-up or collapse, if any.
    pub fn time(&self) -> Option<f64> {
        match *self {
            Verdict::BlewUp { time } | Verdict::StepCollapse { time } => Some(time),
            Verdict::GlobalUntilHorizon => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::BlewUp { .. } => "blew_up",
            Verdict::StepCollapse { .. } => "step_collapse",
            Verdict::GlobalUntilHorizon => "global_until_horizon",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionTrace {
    pub times: Vec<f64>,
    /// J(t) = ∫ v φ.
    pub mass: Vec<f64>,
    pub sup_norm: Vec<f64>,
    /// Path value B(t) at each output time.
    pub path_values: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub verdict: Verdict,
    pub steps: usize,
    /// Nodes clipped from a negative value back to zero.
    pub clipped_nodes: usize,
    /// Most negative value seen before clipping (zero if none).
    pub min_undershoot: f64,
    pub final_state: Vec<f64>,
    pub eta: f64,
}

impl SolutionTrace {
    pub fn tau_num(&self) -> Option<f64> {
        match self.verdict {
            Verdict::BlewUp { time } => Some(time),
            _ => None,
        }
    }

    /// sup |u| = e^{ηB} sup v at the output times.
    pub fn original_sup_norm(&self) -> Vec<f64> {
        self.sup_norm
            .iter()
            .zip(&self.path_values)
            .map(|(s, b)| (self.eta * b).exp() * s)
            .collect()
    }

    /// `t,J,sup_norm`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,J,sup_norm")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e}",
                self.times[i], self.mass[i], self.sup_norm[i]
            )?;
        }
        Ok(())
    }
}

/// `x,v` (or `x,y,v` on rectangles) for one node vector.
pub fn write_snapshot_csv<W: Write>(basis: &SpectralBasis, v: &[f64], mut out: W) -> Result<()> {
    let dom = basis.domain();
    if dom.dimension() == 1 {
        writeln!(out, "x,v")?;
        for (i, val) in v.iter().enumerate() {
            writeln!(out, "{:.12e},{:.12e}", dom.point(i)[0], val)?;
        }
    } else {
        writeln!(out, "x,y,v")?;
        for (i, val) in v.iter().enumerate() {
            let p = dom.point(i);
            writeln!(out, "{:.12e},{:.12e},{:.12e}", p[0], p[1], val)?;
        }
    }
    Ok(())
}

/// J = ∫ v φ under the grid quadrature.
pub fn mass_functional(basis: &SpectralBasis, v: &[f64]) -> f64 {
    basis.domain().inner(v, basis.phi())
}

/// u = e^{ηB} v.
pub fn to_original(v: &[f64], eta: f64, path_value: f64) -> Vec<f64> {
    let f = (eta * path_value).exp();
    v.iter().map(|x| f * x).collect()
}

struct Rhs<'a> {
    params: &'a ModelParams,
    basis: &'a SpectralBasis,
    linear: f64,
}

impl Rhs<'_> {
    /// Fills `out` with the right-hand side and returns the reaction
    /// stiffness estimate used for step control.
    fn eval(&self, v: &[f64], b: f64, lap: &mut [f64], out: &mut [f64]) -> f64 {
        let p = self.params;
        let dom = self.basis.domain();
        dom.laplacian(v, lap);
        let eq = ((p.q - 1.0) * p.eta * b).exp();
        let ep = ((p.p - 1.0) * p.eta * b).exp();
        let emn = ((p.m + p.n - 1.0) * p.eta * b).exp();
        let w = dom.weights();
        let mut iq = 0.0;
        let mut iq1 = 0.0;
        let mut i_n = 0.0;
        let mut in1 = 0.0;
        let mut vmax = 0.0f64;
        for (x, wi) in v.iter().zip(w) {
            if *x > 0.0 {
                iq += wi * x.powf(p.q);
                iq1 += wi * x.powf(p.q - 1.0);
                i_n += wi * x.powf(p.n);
                in1 += wi * x.powf(p.n - 1.0);
            }
            vmax = vmax.max(*x);
        }
        let source = eq * iq;
        let coupling = p.delta * emn * i_n;
        let mut growth = 0.0f64;
        for i in 0..v.len() {
            if dom.is_boundary(i) {
                out[i] = 0.0;
                continue;
            }
            let x = v[i].max(0.0);
            let vm = if p.m == 0.0 { 1.0 } else { x.powf(p.m) };
            let r = self.linear * x + source - p.k * ep * x.powf(p.p) + coupling * vm;
            growth = growth.max(r.abs());
            out[i] = lap[i] + r;
        }
        let mut stiff = self.linear.abs()
            + p.k * p.p * ep * vmax.powf(p.p - 1.0)
            + eq * p.q * iq1
            + p.delta * emn * p.n * vmax.powf(p.m) * in1;
        if p.m >= 1.0 {
            stiff += p.delta * emn * p.m * vmax.powf(p.m - 1.0) * i_n;
        }
        if vmax > 0.0 {
            stiff = stiff.max(growth / vmax);
        }
        stiff
    }
}

fn check_path(path: &FbmPath, controls: &SolverControls) -> Result<f64> {
    if !(controls.horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    if path.grid.t_max() < controls.horizon * (1.0 - 1e-12) {
        return Err(Error::param(
            "path",
            format!(
                "path ends at {} before the horizon {}",
                path.grid.t_max(),
                controls.horizon
            ),
        ));
    }
    let out_dt = controls.output_dt.unwrap_or_else(|| path.grid.dt());
    if !(out_dt > 0.0) {
        return Err(Error::param("output_dt", "must be positive"));
    }
    if path.grid.dt() > MAX_PATH_COARSENING * out_dt * (1.0 + 1e-12) {
        return Err(Error::param(
            "path",
            format!(
                "path spacing {} is more than {}x the output spacing {}",
                path.grid.dt(),
                MAX_PATH_COARSENING,
                out_dt
            ),
        ));
    }
    if !(controls.cfl > 0.0 && controls.cfl <= 1.0) {
        return Err(Error::param("cfl", "must lie in (0, 1]"));
    }
    if !(controls.safety > 0.0) || !(controls.v_max > 0.0) || !(controls.dt_min > 0.0) {
        return Err(Error::param("controls", "safety, v_max and dt_min must be positive"));
    }
    Ok(out_dt)
}

/// Integrates one path realization with explicit Euler and adaptive steps.
pub fn solve(
    params: &ModelParams,
    basis: &SpectralBasis,
    datum: &InitialDatum,
    path: &FbmPath,
    controls: &SolverControls,
) -> Result<SolutionTrace> {
    params.validate()?;
    let out_dt = check_path(path, controls)?;
    let mut v = datum.materialize(basis)?;
    let dom = basis.domain();
    let rhs = Rhs {
        params,
        basis,
        linear: params.gamma - params.ito_shift(),
    };
    let dt_diff = controls.cfl / (2.0 * dom.inverse_spacing_sq());
    let horizon = controls.horizon;
    let mut snapshots_due: Vec<f64> = controls
        .snapshot_times
        .iter()
        .cloned()
        .filter(|&s| s >= 0.0 && s <= horizon)
        .collect();
    snapshots_due.sort_by(f64::total_cmp);
    snapshots_due.dedup();
    let mut snap_iter = 0usize;

    let mut trace = SolutionTrace {
        times: Vec::new(),
        mass: Vec::new(),
        sup_norm: Vec::new(),
        path_values: Vec::new(),
        states: controls.record_states.then(Vec::new),
        snapshots: Vec::new(),
        verdict: Verdict::GlobalUntilHorizon,
        steps: 0,
        clipped_nodes: 0,
        min_undershoot: 0.0,
        final_state: Vec::new(),
        eta: params.eta,
    };
    let record = |trace: &mut SolutionTrace, t: f64, v: &[f64]| {
        trace.times.push(t);
        trace.mass.push(mass_functional(basis, v));
        trace.sup_norm.push(v.iter().cloned().fold(0.0, f64::max));
        trace.path_values.push(path.value_at(t));
        if let Some(s) = trace.states.as_mut() {
            s.push(v.to_vec());
        }
    };

    let mut t = 0.0;
    record(&mut trace, t, &v);
    while snap_iter < snapshots_due.len() && snapshots_due[snap_iter] <= 0.0 {
        trace.snapshots.push((0.0, v.clone()));
        snap_iter += 1;
    }
    let mut out_index = 1usize;
    let n = v.len();
    let mut lap = vec![0.0; n];
    let mut f = vec![0.0; n];
    let eps_t = 1e-12 * horizon.max(1.0);

    while t < horizon - eps_t {
        let b = path.value_at(t);
        let stiff = rhs.eval(&v, b, &mut lap, &mut f);
        let dt_react = if stiff > 0.0 {
            controls.safety / stiff
        } else {
            f64::INFINITY
        };
        let dt_nominal = dt_diff.min(dt_react);
        if dt_nominal < controls.dt_min {
            trace.verdict = Verdict::StepCollapse { time: t };
            record(&mut trace, t, &v);
            break;
        }
        let next_output = (out_index as f64 * out_dt).min(horizon);
        let mut stop = next_output;
        if snap_iter < snapshots_due.len() {
            stop = stop.min(snapshots_due[snap_iter]);
        }
        let dt = dt_nominal.min(stop - t).max(f64::MIN_POSITIVE);
        let prev = v.clone();
        for i in 0..n {
            let x = v[i] + dt * f[i];
            if x < 0.0 {
                trace.clipped_nodes += 1;
                trace.min_undershoot = trace.min_undershoot.min(x);
                v[i] = 0.0;
            } else {
                v[i] = x;
            }
        }
        t += dt;
        trace.steps += 1;
        if v.iter().any(|x| x.is_nan()) {
            return Err(Error::SolverFault {
                time: t,
                reason: "non-finite state".into(),
                last_finite: prev,
            });
        }
        let sup = v.iter().cloned().fold(0.0, f64::max);
        if sup >= controls.v_max {
            trace.verdict = Verdict::BlewUp { time: t };
            record(&mut trace, t, &v);
            break;
        }
        if snap_iter < snapshots_due.len() && t >= snapshots_due[snap_iter] - eps_t {
            trace.snapshots.push((t, v.clone()));
            snap_iter += 1;
        }
        if t >= next_output - eps_t {
            record(&mut trace, t, &v);
            out_index += 1;
        }
    }
    trace.final_state = v;
    Ok(trace)
}

/// Result of a pointwise ordering check between two traces.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub shared_times: usize,
    /// max over shared times and nodes of v₁ − v₂ (negative when ordered).
    pub max_excess: f64,
    pub holds: bool,
}

/// Tolerance for v₁ ≤ v₂ in [`comparison_probe`].
pub const COMPARISON_TOLERANCE: f64 = 1e-8;

/// Checks v₁(t,·) ≤ v₂(t,·) + tolerance at every shared output time.
pub fn comparison_probe(lower: &SolutionTrace, upper: &SolutionTrace) -> Result<ProbeReport> {
    let (s1, s2) = match (&lower.states, &upper.states) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::param("trace", "comparison needs recorded states on both traces")),
    };
    let mut shared = 0usize;
    let mut excess = f64::NEG_INFINITY;
    let mut j = 0usize;
    for (i, &t) in lower.times.iter().enumerate() {
        while j < upper.times.len() && upper.times[j] < t - 1e-12 {
            j += 1;
        }
        if j < upper.times.len() && (upper.times[j] - t).abs() <= 1e-12 {
            shared += 1;
            for (a, b) in s1[i].iter().zip(&s2[j]) {
                excess = excess.max(a - b);
            }
        }
    }
    Ok(ProbeReport {
        shared_times: shared,
        max_excess: excess,
        holds: shared > 0 && excess <= COMPARISON_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::TimeGrid;
    use crate::spectral::{build_basis, DomainSpec};
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams {
            gamma: 0.0,
            k: 1.0,
            delta: 0.0,
            eta: 0.0,
            p: 2.0,
            q: 2.0,
            m: 0.0,
            n: 2.0,
            hurst: Hurst::new(0.75).unwrap(),
        }
    }

    #[test]
    fn parameter_constraints_named() {
        let mut p = params();
        p.q = 3.0;
        p.n = 1.5;
        let v = p.violations();
        assert!(v.contains(&"m+n ≥ q ≥ p > 1".to_string()));
        p.p = 0.5;
        assert!(p.violations().contains(&"p,q,n>1".to_string()));
        assert!(params().validate().is_ok());
    }

    #[test]
    fn mass_of_phi() {
        let basis = build_basis(DomainSpec::interval(1.0, 400), 20).unwrap();
        let j = mass_functional(&basis, basis.phi());
        assert!((j - PI * PI / 8.0).abs() < 1e-4);
    }

    #[test]
    fn datum_validation() {
        let basis = build_basis(DomainSpec::interval(1.0, 10), 5).unwrap();
        assert!(InitialDatum::PhiMultiple(0.0).materialize(&basis).is_err());
        let mut v = vec![0.0; 11];
        assert!(InitialDatum::Nodes(v.clone()).materialize(&basis).is_err());
        v[0] = 1.0;
        assert!(InitialDatum::Nodes(v.clone()).materialize(&basis).is_err());
        v[0] = 0.0;
        v[3] = -1.0;
        assert!(InitialDatum::Nodes(v).materialize(&basis).is_err());
    }

    #[test]
    fn coarse_path_rejected() {
        let basis = build_basis(DomainSpec::interval(1.0, 16), 5).unwrap();
        let path = FbmPath::zeros(Hurst::new(0.75).unwrap(), TimeGrid::new(1.0, 4).unwrap());
        let controls = SolverControls {
            output_dt: Some(0.01),
            ..Default::default()
        };
        assert!(solve(&params(), &basis, &InitialDatum::PhiMultiple(1.0), &path, &controls).is_err());
    }

    #[test]
    fn small_datum_decays() {
        let basis = build_basis(DomainSpec::interval(1.0, 32), 10).unwrap();
        let path = FbmPath::zeros(Hurst::new(0.75).unwrap(), TimeGrid::new(1.0, 100).unwrap());
        let controls = SolverControls::default();
        let tr = solve(&params(), &basis, &InitialDatum::PhiMultiple(0.01), &path, &controls).unwrap();
        assert_eq!(tr.verdict, Verdict::GlobalUntilHorizon);
        assert!(tr.sup_norm.last().unwrap() < &(0.01 * 1.6 * (-9.0f64).exp()));
        assert!(tr.min_undershoot >= -CLIP_TOLERANCE);
    }
}
