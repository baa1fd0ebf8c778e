//! Pathwise bounds for the blow-up time, global-existence certificates and
//! the comparison ODE for the principal-mode mass.

use crate::error::{Error, Result};
use crate::fbm::FbmPath;
use crate::ode::dopri5;
use crate::quadrature::{cumulative_trapezoid, exp_linear_integral, first_crossing};
use crate::rpde::{mass_functional, InitialDatum, ModelParams};
use crate::spectral::{SpectralBasis, SupNormEvaluator};

/// ‖e^{γr} T_r‖_∞ tabulated on a path grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupWeights {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl SemigroupWeights {
    /// Spectral evaluation on every node of `times`.
    pub fn spectral(basis: &SpectralBasis, gamma: f64, times: &[f64]) -> Self {
        let eval = SupNormEvaluator::new(basis);
        SemigroupWeights {
            times: times.to_vec(),
            values: times.iter().map(|&t| eval.eval(gamma, t)).collect(),
        }
    }

    /// The contraction envelope e^{γr} (‖T_r‖ ≤ 1).
    pub fn contraction(gamma: f64, times: &[f64]) -> Self {
        SemigroupWeights {
            times: times.to_vec(),
            values: times.iter().map(|&t| (gamma * t).exp()).collect(),
        }
    }

    fn check(&self, path: &FbmPath) -> Result<()> {
        if self.values.len() != path.values.len() {
            return Err(Error::param(
                "weights",
                format!("{} weights for {} path nodes", self.values.len(), path.values.len()),
            ));
        }
        Ok(())
    }
}

/// Constants of the lower bound for the blow-up time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundInputs {
    /// max{|D|, δ|D|}.
    pub m_const: f64,
    pub f_sup: f64,
    /// 1 / (2M(m+n+q−1) ‖f‖^{m+n−1}).
    pub threshold: f64,
}

pub fn lower_bound_inputs(params: &ModelParams, volume: f64, f_sup: f64) -> Result<LowerBoundInputs> {
    params.validate()?;
    if !(volume > params.k) {
        return Err(Error::Config(format!(
            "lower bound needs |D| > k (|D| = {volume}, k = {})",
            params.k
        )));
    }
    if !(f_sup > 0.0) || !f_sup.is_finite() {
        return Err(Error::param("f_sup", "initial datum sup must be positive and finite"));
    }
    let m_const = volume.max(params.delta * volume);
    let e = params.m + params.n - 1.0;
    let threshold = 1.0 / (2.0 * m_const * (params.m + params.n + params.q - 1.0) * f_sup.powf(e));
    Ok(LowerBoundInputs {
        m_const,
        f_sup,
        threshold,
    })
}

fn lower_integrand(path: &FbmPath, params: &ModelParams, weights: &SemigroupWeights) -> Vec<f64> {
    let e = params.m + params.n - 1.0;
    path.values
        .iter()
        .zip(&weights.values)
        .map(|(b, w)| {
            let x = params.eta * b;
            ((params.q - 1.0) * x).max(e * x).exp() * w.powf(e)
        })
        .collect()
}

/// τ*: first time the accumulated upper-solution integral reaches the
/// threshold; infinity if never reached on the path horizon.
pub fn tau_lower(
    path: &FbmPath,
    params: &ModelParams,
    weights: &SemigroupWeights,
    inputs: &LowerBoundInputs,
) -> Result<f64> {
    weights.check(path)?;
    let g = lower_integrand(path, params, weights);
    let cum = cumulative_trapezoid(&g, path.grid.dt());
    Ok(first_crossing(&path.times(), &cum, inputs.threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Accumulated integral stays below its threshold on the horizon.
    HorizonIntegral,
    /// Infinite-horizon integral against the semigroup decay envelope.
    DecayEnvelope,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub granted: bool,
    /// 1 − (scaled integral); positive when granted.
    pub margin: f64,
    pub scaled_integral: f64,
    /// For the decay envelope: whether the integrand fell below the cutoff
    /// inside the path horizon (otherwise the tail is an envelope estimate).
    pub tail_converged: bool,
}

/// Certificate that the scaled lower-bound integral stays below one.
pub fn global_certificate_horizon(
    path: &FbmPath,
    params: &ModelParams,
    weights: &SemigroupWeights,
    inputs: &LowerBoundInputs,
) -> Result<CertificateReport> {
    weights.check(path)?;
    let g = lower_integrand(path, params, weights);
    let cum = cumulative_trapezoid(&g, path.grid.dt());
    let total = cum.last().copied().unwrap_or(0.0) / inputs.threshold;
    Ok(CertificateReport {
        kind: CertificateKind::HorizonIntegral,
        granted: total < 1.0,
        margin: 1.0 - total,
        scaled_integral: total,
        tail_converged: true,
    })
}

/// Cutoff below which the decay-envelope integrand is treated as zero.
pub const DECAY_INTEGRAND_CUTOFF: f64 = 1e-16;

/// Decay-envelope certificate with 𝒦 = 2M(m+n+q−1)(C₀‖φ‖∞²(1+c))^{m+n−1}.
///
/// Refused when λ₁ ≤ γ, since the envelope does not decay.
pub fn global_certificate_decay(
    path: &FbmPath,
    params: &ModelParams,
    basis: &SpectralBasis,
    kernel_c: f64,
    c0: f64,
    m_const: f64,
) -> Result<CertificateReport> {
    let rate = basis.lambda1() - params.gamma;
    if !(rate > 0.0) {
        return Err(Error::Refused(format!(
            "decay certificate needs λ₁ > γ (λ₁ = {}, γ = {})",
            basis.lambda1(),
            params.gamma
        )));
    }
    let e = params.m + params.n - 1.0;
    let big_k = 2.0
        * m_const
        * (params.m + params.n + params.q - 1.0)
        * (c0 * basis.phi_sup().powi(2) * (1.0 + kernel_c)).powf(e);
    let times = path.times();
    let g: Vec<f64> = path
        .values
        .iter()
        .zip(&times)
        .map(|(b, t)| {
            let x = params.eta * b;
            (((params.q - 1.0) * x).max(e * x) - rate * e * t).exp()
        })
        .collect();
    let stop = g.iter().position(|&v| v < DECAY_INTEGRAND_CUTOFF);
    let end = stop.unwrap_or(g.len() - 1);
    let cum = cumulative_trapezoid(&g[..=end], path.grid.dt());
    // Tail beyond the last node from the exponential envelope at that node.
    let tail = g[end] / (rate * e);
    let integral = cum[end] + tail;
    let scaled = big_k * integral;
    Ok(CertificateReport {
        kind: CertificateKind::DecayEnvelope,
        granted: scaled < 1.0,
        margin: 1.0 - scaled,
        scaled_integral: scaled,
        tail_converged: stop.is_some(),
    })
}

/// Margins (lhs − rhs) of the three admissibility inequalities for b.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub margins: [f64; 3],
    pub holds: bool,
}

/// Eigenvalue entering the admissibility conditions: λ₁, or λ₁ + Λ for
/// Brownian noise.
fn admissibility_eigenvalue(params: &ModelParams, basis: &SpectralBasis) -> f64 {
    if params.hurst.is_brownian() {
        basis.lambda1() + params.brownian_damping()
    } else {
        basis.lambda1()
    }
}

fn admissibility_rhs(params: &ModelParams, basis: &SpectralBasis, running_sup: f64) -> Result<[f64; 3]> {
    if !(params.q > params.p) {
        return Err(Error::Config("admissibility needs q > p".into()));
    }
    let (p, q) = (params.p, params.q);
    let c1 = basis.phi_sup();
    let vol_factor = basis.domain().volume().powf(q - 1.0);
    let lam = admissibility_eigenvalue(params, basis);
    let s = running_sup;
    let r1 = (params.k * c1.powf(p) + lam * c1) * vol_factor * (params.eta * (params.m + params.n - 1.0) * s).exp();
    let r2 = params.k * c1.powf(p) * vol_factor * (params.eta * (q - p) * s).exp();
    let ratio = basis.phi_power_integral(q / (q - p)) / basis.phi_power_integral(p + 1.0);
    let r3 = 2.0 * params.k * ratio.powf((q - p) / p) * (params.eta * (q - 1.0) * s).exp();
    Ok([r1, r2, r3])
}

/// Checks the three admissibility inequalities at running sup `running_sup`.
pub fn b_admissibility(
    b: f64,
    running_sup: f64,
    params: &ModelParams,
    basis: &SpectralBasis,
) -> Result<AdmissibilityReport> {
    let rhs = admissibility_rhs(params, basis, running_sup)?;
    let lhs = b.powf(params.q - params.p);
    let margins = [lhs - rhs[0], lhs - rhs[1], lhs - rhs[2]];
    Ok(AdmissibilityReport {
        margins,
        holds: b > 1.0 && margins.iter().all(|&m| m >= 0.0),
    })
}

/// Smallest b > 1 satisfying all three inequalities (strictly above 1).
pub fn minimal_b(running_sup: f64, params: &ModelParams, basis: &SpectralBasis) -> Result<f64> {
    let rhs = admissibility_rhs(params, basis, running_sup)?;
    let worst = rhs.iter().cloned().fold(0.0, f64::max);
    Ok(worst.powf(1.0 / (params.q - params.p)).max(1.0 + 1e-12))
}

/// Constants of the upper bounds, assembled from the datum and φ-integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperBoundInputs {
    /// J(0) = ∫ f φ.
    pub j0: f64,
    /// ½(∫φ^{q/(q−p)})^{(p−q)/p}, the Hölder constant of the local term.
    pub local_constant: f64,
    /// (∫φ^{n/(n−1)})^{1−n}, the Hölder constant of the coupling term.
    pub coupling_constant: f64,
    /// Local + δ·coupling constants (equal exponents).
    pub n_tilde: f64,
    /// η(q−1).
    pub rho1: f64,
    /// ∫φ^{q/(q−p)}, ∫φ^{n/(n−1)} and ∫φ^{p+1}.
    pub phi_integrals: [f64; 3],
    pub a0: Option<f64>,
    pub eps0: Option<f64>,
    /// ε₀ − A₀ε₀^{(m+n)/(m+n−q)}/J₀^q, the coefficient of the coupling term.
    pub coupling_coefficient: Option<f64>,
    /// ε₀ bound as printed, (J₀^q/A₀)^{q/(m+n−q)}.
    pub eps0_cap_printed: Option<f64>,
    /// ε₀ bound that keeps the coupling coefficient positive,
    /// (J₀^q/A₀)^{(m+n−q)/q}.
    pub eps0_cap_positive: Option<f64>,
    /// Bracket of the supercritical threshold as printed (no ½ on the first term).
    pub bracket_printed: Option<f64>,
    /// Same bracket with the ½ carried from the differential inequality.
    pub bracket_derived: Option<f64>,
}

/// Default ε₀ as a fraction of the smaller of the two caps.
pub const EPS0_FRACTION: f64 = 0.5;

pub fn upper_bound_inputs(
    params: &ModelParams,
    basis: &SpectralBasis,
    datum: &InitialDatum,
    eps0_fraction: f64,
) -> Result<UpperBoundInputs> {
    params.validate()?;
    if !(params.q > params.p) {
        return Err(Error::Config("upper bounds need q > p".into()));
    }
    let f = datum.materialize(basis)?;
    let j0 = mass_functional(basis, &f);
    let (p, q, m, n) = (params.p, params.q, params.m, params.n);
    let i_local = basis.phi_power_integral(q / (q - p));
    let i_coupling = basis.phi_power_integral(n / (n - 1.0));
    let full_local = i_local.powf((p - q) / p);
    let local_constant = 0.5 * full_local;
    let coupling_constant = i_coupling.powf(1.0 - n);
    let n_tilde = local_constant + params.delta * coupling_constant;
    let gap = m + n - q;
    let (a0, eps0, coef, cap_p, cap_pos, br_p, br_d) = if gap > 0.0 {
        let a0 = (gap / (m + n)) * ((m + n) / q).powf(q / gap);
        let base = j0.powf(q) / a0;
        let cap_printed = base.powf(q / gap);
        let cap_positive = base.powf(gap / q);
        let eps0 = eps0_fraction * cap_printed.min(cap_positive);
        let coef = eps0 - a0 * eps0.powf((m + n) / gap) / j0.powf(q);
        let coupling = params.delta * coef * coupling_constant;
        (
            Some(a0),
            Some(eps0),
            Some(coef),
            Some(cap_printed),
            Some(cap_positive),
            Some(full_local + coupling),
            Some(local_constant + coupling),
        )
    } else {
        (None, None, None, None, None, None, None)
    };
    Ok(UpperBoundInputs {
        j0,
        local_constant,
        coupling_constant,
        n_tilde,
        rho1: params.eta * (q - 1.0),
        phi_integrals: [i_local, i_coupling, basis.phi_power_integral(p + 1.0)],
        a0,
        eps0,
        coupling_coefficient: coef,
        eps0_cap_printed: cap_p,
        eps0_cap_positive: cap_pos,
        bracket_printed: br_p,
        bracket_derived: br_d,
    })
}

/// Exponential rate of the linear part of the mass equation: −λ₁ + γ,
/// shifted by −η²/2 for Brownian noise.
pub fn mass_growth_rate(params: &ModelParams, basis: &SpectralBasis) -> f64 {
    -basis.lambda1() + params.gamma - params.ito_shift()
}

/// Upper bound in two forms, with an optional diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    /// The bound as printed.
    pub printed: f64,
    /// The alternative assembly (mirrored sign or re-derived constants).
    pub variant: f64,
    pub diagnostic: Option<String>,
}

fn crossing(path: &FbmPath, exponent: impl Fn(f64, f64) -> f64, threshold: f64) -> f64 {
    let times = path.times();
    let g: Vec<f64> = path
        .values
        .iter()
        .zip(&times)
        .map(|(b, t)| exponent(*b, *t).exp())
        .collect();
    let cum = cumulative_trapezoid(&g, path.grid.dt());
    first_crossing(&times, &cum, threshold)
}

/// τ₁* for m + n = q. The variant flips the sign of the drift exponent.
pub fn tau_upper_critical(
    path: &FbmPath,
    params: &ModelParams,
    basis: &SpectralBasis,
    inputs: &UpperBoundInputs,
) -> Result<UpperBound> {
    if (params.m + params.n - params.q).abs() > 1e-12 {
        return Err(Error::Config("critical upper bound needs m+n = q".into()));
    }
    let mu = params.q;
    let a = mass_growth_rate(params, basis);
    let rho = params.eta * (mu - 1.0);
    let threshold = inputs.j0.powf(1.0 - mu) / ((mu - 1.0) * inputs.n_tilde);
    let printed = crossing(path, |b, t| rho * b + a * (mu - 1.0) * t, threshold);
    let variant = crossing(path, |b, t| rho * b - a * (mu - 1.0) * t, threshold);
    Ok(UpperBound {
        printed,
        variant,
        diagnostic: None,
    })
}

fn min_exponent(params: &ModelParams, b: f64) -> f64 {
    let x = params.eta * b;
    ((params.q - 1.0) * x).min((params.m + params.n - 1.0) * x)
}

/// τ₂* for m + n > q.
///
/// The printed form integrates against e^{−(q−1)a s} with threshold
/// 2J₀^{1−q}/((q−1)a·bracket); the variant solves the Bernoulli equation
/// directly: e^{+(q−1)a s} with threshold J₀^{1−q}/((q−1)·D), D carrying ½.
pub fn tau_upper_supercritical(
    path: &FbmPath,
    params: &ModelParams,
    basis: &SpectralBasis,
    inputs: &UpperBoundInputs,
) -> Result<UpperBound> {
    let (br_p, br_d) = match (inputs.bracket_printed, inputs.bracket_derived) {
        (Some(p), Some(d)) => (p, d),
        _ => return Err(Error::Config("supercritical upper bound needs m+n > q".into())),
    };
    let q = params.q;
    let a = mass_growth_rate(params, basis);
    let j = inputs.j0.powf(1.0 - q);
    let mut diagnostic = None;
    let printed = if a == 0.0 {
        diagnostic = Some("growth rate −λ₁+γ vanishes; printed threshold undefined".to_string());
        f64::INFINITY
    } else {
        let thr = 2.0 * j / ((q - 1.0) * a * br_p);
        if thr <= 0.0 {
            diagnostic = Some(format!("printed threshold {thr:e} is non-positive"));
        }
        crossing(path, |b, t| min_exponent(params, b) - (q - 1.0) * a * t, thr)
    };
    let variant = if br_d > 0.0 {
        let thr = j / ((q - 1.0) * br_d);
        crossing(path, |b, t| min_exponent(params, b) + (q - 1.0) * a * t, thr)
    } else {
        f64::INFINITY
    };
    Ok(UpperBound {
        printed,
        variant,
        diagnostic,
    })
}

/// Lower and upper stopping times of the Brownian case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianStoppingTimes {
    /// Lower bound σ*.
    pub sigma_star: f64,
    /// Upper bound σ** for the given a₁.
    pub sigma_star_star: f64,
}

/// σ* with threshold 1/(2M(m+n−1)‖f‖^{m+n−1}) and σ** with threshold a₁.
pub fn brownian_stopping_times(
    path: &FbmPath,
    params: &ModelParams,
    basis: &SpectralBasis,
    m_const: f64,
    f_sup: f64,
    a1: f64,
) -> Result<BrownianStoppingTimes> {
    if !params.hurst.is_brownian() {
        return Err(Error::Config("Brownian stopping times need H = 0.5".into()));
    }
    let lam = params.brownian_damping();
    let e = params.m + params.n - 1.0;
    let thr = 1.0 / (2.0 * m_const * e * f_sup.powf(e));
    let sigma_star = crossing(
        path,
        |w, r| {
            let x = params.eta * w;
            ((params.q - 1.0) * x).max(e * x) - lam * e * r
        },
        thr,
    );
    let rate = (basis.lambda1() + lam) * (params.q - 1.0);
    let times = path.times();
    let g: Vec<f64> = path
        .values
        .iter()
        .zip(&times)
        .map(|(w, s)| {
            let x = params.eta * (params.q - 1.0) * w - rate * s;
            if x >= 0.0 {
                (-x).exp()
            } else {
                0.0
            }
        })
        .collect();
    let cum = cumulative_trapezoid(&g, path.grid.dt());
    Ok(BrownianStoppingTimes {
        sigma_star,
        sigma_star_star: first_crossing(&times, &cum, a1),
    })
}

/// The two assemblies of a₁: with (−λ₁+γ) as printed, and with (λ₁+Λ).
pub fn a1_assemblies(params: &ModelParams, basis: &SpectralBasis, inputs: &UpperBoundInputs) -> Result<(f64, f64)> {
    let br = inputs
        .bracket_printed
        .ok_or_else(|| Error::Config("a₁ needs m+n > q".into()))?;
    let q = params.q;
    let j = 2.0 * inputs.j0.powf(1.0 - q);
    let printed = j / ((q - 1.0) * (-basis.lambda1() + params.gamma) * br);
    let substituted = j / ((q - 1.0) * (basis.lambda1() + params.brownian_damping()) * br);
    Ok((printed, substituted))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonRegime {
    /// m + n = q.
    Critical,
    /// m + n > q.
    Supercritical,
}

/// Closed-form comparison solution I(t) next to an independent numerical
/// integration of the same scalar ODE.
#[derive(Debug, Clone)]
pub struct ComparisonOde {
    pub times: Vec<f64>,
    /// Closed form; infinite from the singularity on.
    pub closed_form: Vec<f64>,
    /// Numerical solution at nodes before 0.99 × singularity (NaN after).
    pub numeric: Vec<f64>,
    /// Singularity of the closed form; infinity if beyond the path horizon.
    pub singularity: f64,
    /// Largest relative gap between the two on the compared nodes.
    pub max_relative_gap: f64,
    pub compared_nodes: usize,
    /// Supercritical only: the printed closed form with exponent −1/(p−1).
    pub printed_variant: Option<Vec<f64>>,
}

/// Fraction of the singularity time up to which the two solutions are compared.
pub const COMPARISON_WINDOW: f64 = 0.99;

/// Solves I' = a I + C g(t) I^q, I(0) = J₀, where g = e^{η(q−1)B} (critical)
/// or e^{η(q−1)B} ∧ e^{η(m+n−1)B} (supercritical) and `coefficient` is C.
pub fn comparison_ode(
    path: &FbmPath,
    params: &ModelParams,
    basis: &SpectralBasis,
    j0: f64,
    coefficient: f64,
    regime: ComparisonRegime,
) -> Result<ComparisonOde> {
    if !(j0 > 0.0) || !(coefficient >= 0.0) {
        return Err(Error::param(
            "comparison",
            "J₀ must be positive and the coefficient non-negative",
        ));
    }
    let q = params.q;
    let a = mass_growth_rate(params, basis);
    let times = path.times();
    let dt = path.grid.dt();
    let pieces = |i: usize| -> Vec<(f64, f64, f64)> {
        // (start, end, B at start, slope) pieces on which the exponent is linear.
        let (t0, t1) = (times[i], times[i + 1]);
        let (b0, b1) = (path.values[i], path.values[i + 1]);
        let slope = (b1 - b0) / dt;
        let mut cuts = vec![(t0, t1)];
        if regime == ComparisonRegime::Supercritical && b0 * b1 < 0.0 {
            let tz = t0 - b0 / slope;
            cuts = vec![(t0, tz), (tz, t1)];
        }
        cuts.into_iter().map(|(s, e)| (s, e, b0 + slope * (s - t0))).collect()
    };
    let coef_b = |bmid: f64| -> f64 {
        match regime {
            ComparisonRegime::Critical => params.eta * (q - 1.0),
            ComparisonRegime::Supercritical => {
                if params.eta * bmid >= 0.0 {
                    params.eta * (q - 1.0)
                } else {
                    params.eta * (params.m + params.n - 1.0)
                }
            }
        }
    };
    let threshold = j0.powf(1.0 - q) / ((q - 1.0) * coefficient);
    let mut cum = vec![0.0; times.len()];
    let mut singularity = f64::INFINITY;
    for i in 0..times.len() - 1 {
        let slope = (path.values[i + 1] - path.values[i]) / dt;
        let mut acc = cum[i];
        for (s, e, bs) in pieces(i) {
            let bmid = bs + slope * 0.5 * (e - s);
            let cb = coef_b(bmid);
            let alpha = cb * bs + (q - 1.0) * a * s;
            let beta = cb * slope + (q - 1.0) * a;
            let piece = exp_linear_integral(alpha, beta, e - s);
            if singularity.is_infinite() && acc + piece >= threshold {
                let need = threshold - acc;
                let x = if beta.abs() < 1e-14 {
                    need / alpha.exp()
                } else {
                    (1.0 + beta * need * (-alpha).exp()).ln() / beta
                };
                singularity = s + x.clamp(0.0, e - s);
            }
            acc += piece;
        }
        cum[i + 1] = acc;
    }
    let closed_form: Vec<f64> = times
        .iter()
        .zip(&cum)
        .map(|(&t, &c)| {
            if t >= singularity {
                f64::INFINITY
            } else {
                let inner = j0.powf(1.0 - q) - coefficient * (q - 1.0) * c;
                (a * t).exp() * inner.powf(-1.0 / (q - 1.0))
            }
        })
        .collect();

    let g = |t: f64| -> f64 {
        let b = path.value_at(t);
        (coef_b(b) * b).exp()
    };
    let stop_at = COMPARISON_WINDOW * singularity;
    let mut numeric = vec![f64::NAN; times.len()];
    numeric[0] = j0;
    let mut y = j0;
    let mut compared = 0usize;
    let mut gap = 0.0f64;
    for i in 0..times.len() - 1 {
        if times[i + 1] >= stop_at {
            break;
        }
        let mut t_start = times[i];
        for (s, e, _) in pieces(i) {
            let _ = s;
            y = dopri5(|t, y| a * y + coefficient * g(t) * y.powf(q), t_start, y, e, 1e-13, 0.0)?;
            t_start = e;
        }
        numeric[i + 1] = y;
        compared += 1;
        gap = gap.max((y - closed_form[i + 1]).abs() / closed_form[i + 1].abs());
    }

    let printed_variant = if regime == ComparisonRegime::Supercritical {
        let exps: Vec<f64> = path
            .values
            .iter()
            .zip(&times)
            .map(|(b, t)| (min_exponent(params, *b) - (q - 1.0) * a * t).exp())
            .collect();
        let ci = cumulative_trapezoid(&exps, dt);
        Some(
            times
                .iter()
                .zip(&ci)
                .map(|(&t, &c)| {
                    let inner = j0.powf(1.0 - q) - (q - 1.0) * a * coefficient * c;
                    ((q - 1.0) * a * t).exp() * inner.powf(-1.0 / (params.p - 1.0))
                })
                .collect(),
        )
    } else {
        None
    };

    Ok(ComparisonOde {
        times,
        closed_form,
        numeric,
        singularity,
        max_relative_gap: gap,
        compared_nodes: compared,
        printed_variant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{Hurst, TimeGrid};
    use crate::spectral::{build_basis, DomainSpec};

    fn params() -> ModelParams {
        ModelParams {
            gamma: 0.0,
            k: 0.5,
            delta: 1.0,
            eta: 0.0,
            p: 1.5,
            q: 2.0,
            m: 0.0,
            n: 2.0,
            hurst: Hurst::new(0.75).unwrap(),
        }
    }

    #[test]
    fn constant_integrand_lower_bound() {
        // With η = 0 and unit weights: integrand 1, |D| = 1, δ = 1, ‖f‖ = 1,
        // threshold 1/(2·1·3·1) = 1/6.
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let path = FbmPath::zeros(params().hurst, grid);
        let w = SemigroupWeights::contraction(0.0, &path.times());
        let inputs = lower_bound_inputs(&params(), 1.0, 1.0).unwrap();
        let tau = tau_lower(&path, &params(), &w, &inputs).unwrap();
        assert!((tau - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_needs_volume_above_k() {
        let mut p = params();
        p.k = 2.0;
        assert!(lower_bound_inputs(&p, 1.0, 1.0).is_err());
    }

    #[test]
    fn decay_certificate_refused_without_gap() {
        let basis = build_basis(DomainSpec::interval(1.0, 32), 10).unwrap();
        let mut p = params();
        p.gamma = basis.lambda1() + 0.1;
        let path = FbmPath::zeros(p.hurst, TimeGrid::new(1.0, 10).unwrap());
        assert!(matches!(
            global_certificate_decay(&path, &p, &basis, 1.0, 1.0, 1.0),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn decay_certificate_deterministic_margin() {
        let basis = build_basis(DomainSpec::interval(1.0, 64), 20).unwrap();
        let p = params();
        let path = FbmPath::zeros(p.hurst, TimeGrid::new(10.0, 100_000).unwrap());
        let c0 = 1e-3;
        let rep = global_certificate_decay(&path, &p, &basis, 1.0, c0, 1.0).unwrap();
        let e = p.m + p.n - 1.0;
        let big_k = 2.0 * 3.0 * (c0 * basis.phi_sup().powi(2) * 2.0).powf(e);
        let expected = 1.0 - big_k / (basis.lambda1() * e);
        assert!(rep.granted);
        assert!(rep.tail_converged);
        assert!((rep.margin - expected).abs() < 1e-6);
    }

    #[test]
    fn minimal_b_is_admissible_boundary() {
        let basis = build_basis(DomainSpec::interval(4.0, 64), 20).unwrap();
        let p = params();
        let b = minimal_b(0.3, &p, &basis).unwrap();
        assert!(b_admissibility(b * (1.0 + 1e-9), 0.3, &p, &basis).unwrap().holds);
        assert!(!b_admissibility(b * (1.0 - 1e-6), 0.3, &p, &basis).unwrap().holds);
    }
}
