//! Analytic blow-up probability bounds and their Monte Carlo counterparts.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fbm::{replicate_seed, FbmPath};
use crate::quadrature::{integrate, kahan_sum};
use crate::rpde::{SolutionTrace, Verdict};
use crate::special::{bessel_j_zeros, gamma_p, gamma_q};

/// Which constant plays the role of x inside ln(x + 1) in the tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogArgument {
    /// The bracket Ñ itself, as in the theorem statement.
    Bracket,
    /// The stopping threshold J₀^{1−μ}/((μ−1)Ñ), as in the M_H definition.
    Threshold,
}

/// How the tail constant enters the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailAssembly {
    /// (N−1)² · M_H / (2ρ₁²), the displayed probability bound.
    Multiply,
    /// (N−1)² / (2ρ₁² M_H), the general tail inequality.
    Divide,
}

/// ((α−H)/α)^{2−2H/α} ln(x+1)^{2H/α−2}, the closed form as printed.
pub fn m_h_printed(alpha: f64, hurst: f64, x: f64) -> Result<f64> {
    check_alpha(alpha, hurst)?;
    let l = (x + 1.0).ln();
    Ok(((alpha - hurst) / alpha).powf(2.0 - 2.0 * hurst / alpha) * l.powf(2.0 * hurst / alpha - 2.0))
}

/// sup_t t^{2H}/(ln(x+1) + t^α)², attained at t^α = H ln(x+1)/(α−H).
pub fn m_h_exact(alpha: f64, hurst: f64, x: f64) -> Result<f64> {
    check_alpha(alpha, hurst)?;
    let l = (x + 1.0).ln();
    let ta = hurst * l / (alpha - hurst);
    Ok(ta.powf(2.0 * hurst / alpha) / (l + ta).powi(2))
}

fn check_alpha(alpha: f64, hurst: f64) -> Result<()> {
    if !(alpha > hurst) {
        return Err(Error::Config(format!(
            "weight exponent α = {alpha} must exceed H = {hurst}"
        )));
    }
    Ok(())
}

/// Per-path sup of the ratio defining N(H), truncated at the path horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct NhEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Paths whose grid supremum fell below the t → ∞ limit 1.
    pub clamped_paths: usize,
    pub n_paths: usize,
    pub t_max: f64,
    /// Expected mass of the integrand beyond t_max.
    pub tail_in_mean: f64,
}

/// Monte Carlo N(H) with drift rate `a` = −λ₁+γ (must be negative).
pub fn estimate_n_h(paths: &[FbmPath], a: f64, rho1: f64, mu: f64, alpha: f64, x: f64) -> Result<NhEstimate> {
    if paths.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if !(a < 0.0) {
        return Err(Error::Config("N(H) needs λ₁ > γ".into()));
    }
    let l = (x + 1.0).ln();
    let h2 = 2.0 * paths[0].hurst.value();
    let sups: Vec<(f64, bool)> = paths
        .par_iter()
        .map(|path| {
            let dt = path.grid.dt();
            let times = path.times();
            let mut best = f64::NEG_INFINITY;
            let mut acc = 0.0;
            let mut prev = 0.0;
            for (i, (&t, &b)) in times.iter().zip(&path.values).enumerate() {
                let g = (a * (mu - 1.0) * t - 0.5 * rho1 * rho1 * t.powf(h2) + rho1 * b).exp();
                if i > 0 {
                    acc += 0.5 * dt * (prev + g);
                }
                prev = g;
                let ta = t.powf(alpha);
                best = best.max(((1.0 + acc).ln() + ta) / (l + ta));
            }
            (best.max(1.0), best < 1.0)
        })
        .collect();
    let n = sups.len() as f64;
    let mean = kahan_sum(sups.iter().map(|s| s.0)) / n;
    let var = if sups.len() > 1 {
        kahan_sum(sups.iter().map(|s| (s.0 - mean).powi(2))) / (n - 1.0)
    } else {
        0.0
    };
    let t_max = paths[0].grid.t_max();
    let rate = a * (mu - 1.0);
    Ok(NhEstimate {
        value: mean,
        std_error: (var / n).sqrt(),
        clamped_paths: sups.iter().filter(|s| s.1).count(),
        n_paths: sups.len(),
        t_max,
        tail_in_mean: (rate * t_max).exp() / (-rate),
    })
}

/// 1 − exp{−exponent}, with the exponent assembled per `assembly`.
pub fn malliavin_assemble(n_h: f64, m_h: f64, rho1: f64, assembly: TailAssembly) -> f64 {
    let excess = (n_h - 1.0).max(0.0).powi(2);
    let exponent = match assembly {
        TailAssembly::Multiply => excess * m_h / (2.0 * rho1 * rho1),
        TailAssembly::Divide => excess / (2.0 * rho1 * rho1 * m_h),
    };
    (1.0 - (-exponent).exp()).clamp(0.0, 1.0)
}

/// Malliavin lower bound in all four readings.
#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinReport {
    /// Printed reading: x = Ñ, printed M_H, multiplied.
    pub printed: f64,
    pub variants: Vec<MalliavinVariant>,
    /// Set when λ₁ < γ: blow-up is almost sure.
    pub almost_sure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalliavinVariant {
    pub log_argument: LogArgument,
    pub assembly: TailAssembly,
    pub exact_m_h: bool,
    pub n_h: NhEstimate,
    pub m_h: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MalliavinInputs {
    pub lambda1: f64,
    pub gamma: f64,
    pub eta: f64,
    pub mu: f64,
    pub n_tilde: f64,
    pub j0: f64,
}

/// Lower bound for P(τ < ∞) when H > ½ and m+n = q.
///
/// Returns 1 when λ₁ < γ.
pub fn malliavin_lower_bound(paths: &[FbmPath], inputs: MalliavinInputs, alpha: f64) -> Result<MalliavinReport> {
    let MalliavinInputs {
        lambda1,
        gamma,
        eta,
        mu,
        n_tilde,
        j0,
    } = inputs;
    let hurst = paths.first().ok_or(Error::EmptyEnsemble)?.hurst.value();
    if hurst <= 0.5 {
        return Err(Error::Config("Malliavin bound needs H > 1/2".into()));
    }
    check_alpha(alpha, hurst)?;
    if lambda1 < gamma {
        return Ok(MalliavinReport {
            printed: 1.0,
            variants: Vec::new(),
            almost_sure: true,
        });
    }
    if lambda1 == gamma {
        return Err(Error::Config("Malliavin bound undefined at λ₁ = γ".into()));
    }
    let rho1 = eta * (mu - 1.0);
    if !(rho1 > 0.0) {
        return Err(Error::Config("Malliavin bound needs η(μ−1) > 0".into()));
    }
    let a = -lambda1 + gamma;
    let mut variants = Vec::new();
    for arg in [LogArgument::Bracket, LogArgument::Threshold] {
        let x = match arg {
            LogArgument::Bracket => n_tilde,
            LogArgument::Threshold => j0.powf(1.0 - mu) / ((mu - 1.0) * n_tilde),
        };
        let n_h = estimate_n_h(paths, a, rho1, mu, alpha, x)?;
        for exact in [false, true] {
            let m_h = if exact {
                m_h_exact(alpha, hurst, x)?
            } else {
                m_h_printed(alpha, hurst, x)?
            };
            for assembly in [TailAssembly::Multiply, TailAssembly::Divide] {
                variants.push(MalliavinVariant {
                    log_argument: arg,
                    assembly,
                    exact_m_h: exact,
                    n_h: n_h.clone(),
                    m_h,
                    bound: malliavin_assemble(n_h.value, m_h, rho1, assembly),
                });
            }
        }
    }
    Ok(MalliavinReport {
        printed: variants[0].bound,
        variants,
        almost_sure: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaLawInputs {
    pub theta1: f64,
    pub threshold: f64,
}

impl GammaLawInputs {
    /// θ₁ = 2(λ₁+Λ)(μ−1)/ρ₁², threshold 2(μ−1)Ñ/(ρ₁² J₀^{1−μ}).
    pub fn assemble(lambda1: f64, big_lambda: f64, eta: f64, mu: f64, n_tilde: f64, j0: f64) -> Self {
        let rho1 = eta * (mu - 1.0);
        GammaLawInputs {
            theta1: 2.0 * (lambda1 + big_lambda) * (mu - 1.0) / (rho1 * rho1),
            threshold: 2.0 * (mu - 1.0) * n_tilde / (rho1 * rho1 * j0.powf(1.0 - mu)),
        }
    }
}

/// Lower bound P(X(θ₁,1) ≤ threshold) for the critical Brownian case.
pub fn gamma_law_case1(inputs: GammaLawInputs) -> Result<f64> {
    if !(inputs.theta1 > 0.0) {
        return Err(Error::param("theta1", "shape must be positive (needs λ₁+Λ > 0)"));
    }
    if inputs.threshold <= 0.0 {
        return Ok(0.0);
    }
    gamma_p(inputs.theta1, inputs.threshold)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesselSeriesInputs {
    pub order: f64,
    pub a1: f64,
    /// Prefactor 8(λ₁+Λ)(q−1)/(η(q−1))² = 4(ν+1).
    pub prefactor: f64,
    /// (η(q−1))²/8.
    pub decay: f64,
}

impl BesselSeriesInputs {
    pub fn assemble(lambda1: f64, big_lambda: f64, eta: f64, q: f64, a1: f64) -> Self {
        let rho = eta * (q - 1.0);
        let rate = (lambda1 + big_lambda) * (q - 1.0);
        BesselSeriesInputs {
            order: 2.0 * rate / (rho * rho) - 1.0,
            a1,
            prefactor: 8.0 * rate / (rho * rho),
            decay: rho * rho / 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesselSeriesResult {
    pub value: f64,
    pub n_terms: usize,
    /// Bound on the omitted tail (times the prefactor).
    pub truncation_bound: f64,
    pub zeros: Vec<f64>,
}

/// Minimum spacing of consecutive positive zeros used by the tail bound.
pub const ZERO_SPACING_FLOOR: f64 = std::f64::consts::FRAC_PI_2;
const MAX_BESSEL_TERMS: usize = 4000;

/// Lower bound 4(ν+1)·Σ exp(−c a₁ j²)/j² for the supercritical Brownian case.
pub fn bessel_series_case2(inputs: &BesselSeriesInputs) -> Result<BesselSeriesResult> {
    if !(inputs.order > -1.0) {
        return Err(Error::param("order", "Bessel order must exceed −1"));
    }
    if !(inputs.a1 > 0.0) {
        return Err(Error::param("a1", "series threshold must be positive"));
    }
    let ca = inputs.decay * inputs.a1;
    let mut count = 32usize;
    loop {
        let zeros = bessel_j_zeros(inputs.order, count)?;
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (i, &j) in zeros.iter().enumerate() {
            let term = (-ca * j * j).exp() / (j * j);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            let next = zeros.get(i + 1).copied();
            if let Some(jn) = next {
                let next_term = (-ca * jn * jn).exp() / (jn * jn);
                if next_term < 1e-14 * sum || next_term == 0.0 {
                    // Terms decrease; after jn they shrink at least geometrically.
                    let ratio = (-ca * 2.0 * jn * ZERO_SPACING_FLOOR).exp();
                    let tail = next_term / (1.0 - ratio);
                    return Ok(BesselSeriesResult {
                        value: inputs.prefactor * sum,
                        n_terms: i + 1,
                        truncation_bound: inputs.prefactor * tail,
                        zeros: zeros[..=i].to_vec(),
                    });
                }
            }
        }
        if count >= MAX_BESSEL_TERMS {
            return Err(Error::Numerical(format!(
                "Bessel series did not converge in {count} terms (c·a₁ = {ca:e})"
            )));
        }
        count *= 4;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBoundInputs {
    pub n_tilde1: f64,
    pub shape: f64,
    pub scale: f64,
}

impl DensityBoundInputs {
    /// shape 2Λ(m+n−1)/(η(q−1))², scale 2/(η(q−1))².
    pub fn assemble(big_lambda: f64, eta: f64, q: f64, m_plus_n: f64, n_tilde1: f64) -> Self {
        let rho2 = (eta * (q - 1.0)).powi(2);
        DensityBoundInputs {
            n_tilde1,
            shape: 2.0 * big_lambda * (m_plus_n - 1.0) / rho2,
            scale: 2.0 / rho2,
        }
    }
}

/// The two readings of the density-bound threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityThresholds {
    /// 1/(2M(m+n−1)‖f‖^{m+n−1}) − 1/((λ₁+Λ)(q−1)).
    pub printed: f64,
    /// 1/(2M(m+n−1)‖f‖^{m+n−1}) − 1/(Λ(m+n−1)).
    pub derived: f64,
}

pub fn density_thresholds(
    m_const: f64,
    m_plus_n: f64,
    q: f64,
    f_sup: f64,
    lambda1: f64,
    big_lambda: f64,
) -> DensityThresholds {
    let head = 1.0 / (2.0 * m_const * (m_plus_n - 1.0) * f_sup.powf(m_plus_n - 1.0));
    DensityThresholds {
        printed: head - 1.0 / ((lambda1 + big_lambda) * (q - 1.0)),
        derived: head - 1.0 / (big_lambda * (m_plus_n - 1.0)),
    }
}

/// Inverse-gamma density with the given shape and scale.
pub fn inverse_gamma_density(shape: f64, scale: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let z = scale / y;
    (shape * z.ln() - z - crate::special::ln_gamma(shape)).exp() / y
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBound {
    pub value: f64,
    /// Direct quadrature of the density tail.
    pub quadrature: f64,
    /// Threshold ≤ 0: the bound is the trivial 1.
    pub vacuous: bool,
}

/// Upper bound ∫_{Ñ₁}^∞ h₃ via the incomplete gamma of the reciprocal.
pub fn density_upper_bound(inputs: DensityBoundInputs) -> Result<DensityBound> {
    if !(inputs.shape > 0.0) || !(inputs.scale > 0.0) {
        return Err(Error::param("h3", "shape and scale must be positive (needs Λ > 0)"));
    }
    if inputs.n_tilde1 <= 0.0 {
        return Ok(DensityBound {
            value: 1.0,
            quadrature: 1.0,
            vacuous: true,
        });
    }
    let n1 = inputs.n_tilde1;
    let value = gamma_p(inputs.shape, inputs.scale / n1)?;
    // y = Ñ₁/u maps the tail onto (0, 1].
    let quadrature = integrate(
        |u| {
            if u <= 0.0 {
                0.0
            } else {
                inverse_gamma_density(inputs.shape, inputs.scale, n1 / u) * n1 / (u * u)
            }
        },
        0.0,
        1.0,
        1e-13,
        1e-12,
    )?;
    Ok(DensityBound {
        value,
        quadrature,
        vacuous: false,
    })
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
pub const MIN_ENSEMBLE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub n: usize,
    pub blown_up: usize,
    pub censored: usize,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub censored_fraction: f64,
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Fraction of traces that blew up or collapsed their step.
pub fn mc_blowup_probability(traces: &[SolutionTrace]) -> Result<McEstimate> {
    if traces.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if traces.len() < MIN_ENSEMBLE {
        return Err(Error::EnsembleTooSmall {
            got: traces.len(),
            need: MIN_ENSEMBLE,
        });
    }
    let blown_up = traces
        .iter()
        .filter(|t| matches!(t.verdict, Verdict::BlewUp { .. } | Verdict::StepCollapse { .. }))
        .count();
    let censored = traces.len() - blown_up;
    let (lo, hi) = wilson_interval(blown_up, traces.len(), Z_95);
    Ok(McEstimate {
        n: traces.len(),
        blown_up,
        censored,
        estimate: blown_up as f64 / traces.len() as f64,
        ci_low: lo,
        ci_high: hi,
        censored_fraction: censored as f64 / traces.len() as f64,
    })
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS band coefficient for the acceptance test.
pub const KS_BAND: f64 = 1.63;
/// Truncation level on the expected tail of the functional.
pub const TAIL_LEVEL: f64 = 1e-8;

/// CDF of 1/(2X), X ~ Gamma(α, 1).
pub fn inverse_gamma_half_cdf(alpha: f64, y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        gamma_q(alpha, 1.0 / (2.0 * y)).unwrap_or(f64::NAN)
    }
}

fn inverse_gamma_half_density_max(alpha: f64) -> f64 {
    // Mode of the inverse-gamma(α, ½) density is ½/(α+1).
    inverse_gamma_density(alpha, 0.5, 0.5 / (alpha + 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub alpha: f64,
    pub n: usize,
    pub horizon: f64,
    pub dt: f64,
    pub ks: f64,
    pub band: f64,
    pub allowance: f64,
    pub sample_mean: f64,
    pub reference_mean: f64,
    pub passed: bool,
}

/// Simulates ∫₀^T e^{2(W−αt)}dt on `n_paths` Brownian paths and compares the
/// empirical law with 1/(2·Gamma(α,1)).
pub fn exponential_functional_law_check(alpha: f64, n_paths: usize, dt: f64, master_seed: u64) -> Result<KsReport> {
    if !(alpha > 1.0) {
        return Err(Error::Refused(format!(
            "α = {alpha} must exceed 1 for a controllable tail"
        )));
    }
    if n_paths == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let horizon = -TAIL_LEVEL.ln() / (2.0 * (alpha - 1.0));
    let steps = (horizon / dt).ceil() as usize;
    let sd = dt.sqrt();
    let samples: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(replicate_seed(master_seed, i));
            let mut w = 0.0;
            let mut prev = 1.0;
            let mut acc = 0.0;
            for k in 1..=steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                w += sd * z;
                let g = (2.0 * (w - alpha * k as f64 * dt)).exp();
                acc += 0.5 * dt * (prev + g);
                prev = g;
            }
            acc
        })
        .collect();
    Ok(ks_report(alpha, &samples, horizon, dt))
}

fn ks_report(alpha: f64, samples: &[f64], horizon: f64, dt: f64) -> KsReport {
    let n = samples.len();
    let ks = ks_statistic(samples, |y| inverse_gamma_half_cdf(alpha, y));
    let band = KS_BAND / (n as f64).sqrt();
    // Markov on the tail mass ε = √E plus the CDF shift over ε.
    let tail_mean = (-2.0 * (alpha - 1.0) * horizon).exp() / (2.0 * (alpha - 1.0));
    let eps = tail_mean.sqrt();
    let allowance = if horizon.is_finite() {
        eps * (1.0 + inverse_gamma_half_density_max(alpha))
    } else {
        0.0
    };
    KsReport {
        alpha,
        n,
        horizon,
        dt,
        ks,
        band,
        allowance,
        sample_mean: kahan_sum(samples.iter().copied()) / n as f64,
        reference_mean: 1.0 / (2.0 * (alpha - 1.0)),
        passed: ks < band + allowance,
    }
}

/// KS check on exact draws of 1/(2·Gamma(α,1)), calibrating the band.
pub fn ks_self_test(alpha: f64, n: usize, seed: u64) -> Result<KsReport> {
    let law = rand_distr::Gamma::new(alpha, 1.0).map_err(|e| Error::param("alpha", e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n).map(|_| 0.5 / law.sample(&mut rng)).collect();
    Ok(ks_report(alpha, &samples, f64::INFINITY, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVerdict {
    Consistent,
    /// The bound contradicts the Monte Carlo interval.
    Violation,
    /// The analytic value left [0, 1].
    OutOfRange,
    /// The bound could not be evaluated.
    Undefined,
}

impl BoundVerdict {
    pub fn label(self) -> &'static str {
        match self {
            BoundVerdict::Consistent => "consistent",
            BoundVerdict::Violation => "violation",
            BoundVerdict::OutOfRange => "out_of_range",
            BoundVerdict::Undefined => "undefined",
        }
    }
}

/// Confronts an analytic bound with the Monte Carlo interval.
pub fn judge(analytic: f64, side: BoundSide, mc: &McEstimate) -> BoundVerdict {
    if !analytic.is_finite() {
        return BoundVerdict::Undefined;
    }
    if !(0.0..=1.0).contains(&analytic) {
        return BoundVerdict::OutOfRange;
    }
    let ok = match side {
        BoundSide::Lower => analytic <= mc.ci_high,
        BoundSide::Upper => analytic >= mc.ci_low,
    };
    if ok {
        BoundVerdict::Consistent
    } else {
        BoundVerdict::Violation
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_h_printed_exceeds_exact_by_known_factor() {
        for &(a, h, x) in &[(1.0, 0.75, 3.0), (2.0, 0.6, 0.5), (0.9, 0.8, 10.0)] {
            let ratio = m_h_printed(a, h, x).unwrap() / m_h_exact(a, h, x).unwrap();
            assert!((ratio - (a / h).powf(2.0 * h / a)).abs() < 1e-12 * ratio);
        }
        assert!(m_h_printed(0.7, 0.75, 1.0).is_err());
    }

    #[test]
    fn m_h_exact_is_the_supremum() {
        let (a, h, x): (f64, f64, f64) = (1.3, 0.7, 2.0);
        let l = (x + 1.0).ln();
        let brute = (1..200_000)
            .map(|i| i as f64 * 1e-4)
            .map(|t| t.powf(2.0 * h) / (l + t.powf(a)).powi(2))
            .fold(0.0, f64::max);
        assert!((brute - m_h_exact(a, h, x).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn assembly_limits() {
        assert_eq!(malliavin_assemble(1.0, 0.3, 0.5, TailAssembly::Multiply), 0.0);
        let b1 = malliavin_assemble(1.5, 0.3, 0.5, TailAssembly::Multiply);
        let b2 = malliavin_assemble(1.5, 0.3, 0.4, TailAssembly::Multiply);
        assert!(b2 > b1);
    }

    #[test]
    fn gamma_law_exponential_case() {
        let p = gamma_law_case1(GammaLawInputs {
            theta1: 1.0,
            threshold: 2f64.ln(),
        })
        .unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        assert!(gamma_law_case1(GammaLawInputs {
            theta1: 0.0,
            threshold: 1.0
        })
        .is_err());
    }

    #[test]
    fn bessel_series_half_order_matches_sine_zeros() {
        // Order ½ has zeros kπ; as a₁ → 0 the Rayleigh sum drives the series to 1.
        let pi2 = std::f64::consts::PI.powi(2);
        for &a1 in &[1e-4, 0.01, 0.5] {
            let inputs = BesselSeriesInputs {
                order: 0.5,
                a1,
                prefactor: 6.0,
                decay: 1.0,
            };
            let r = bessel_series_case2(&inputs).unwrap();
            let oracle: f64 = 6.0
                * (1..200_000)
                    .map(|k| (k as f64).powi(2) * pi2)
                    .map(|j2| (-a1 * j2).exp() / j2)
                    .sum::<f64>();
            assert!((r.value - oracle).abs() < 1e-10, "{a1}: {} vs {oracle}", r.value);
            assert!(r.value < 1.0);
        }
        let far = bessel_series_case2(&BesselSeriesInputs {
            order: 0.5,
            a1: 50.0,
            prefactor: 6.0,
            decay: 1.0,
        })
        .unwrap();
        assert!(far.value < 1e-200);
    }

    #[test]
    fn density_bound_reference() {
        let b = density_upper_bound(DensityBoundInputs {
            n_tilde1: 1.0,
            shape: 1.0,
            scale: 1.0,
        })
        .unwrap();
        assert!((b.value - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert!((b.quadrature - b.value).abs() < 1e-10);
        let v = density_upper_bound(DensityBoundInputs {
            n_tilde1: -1.0,
            shape: 1.0,
            scale: 1.0,
        })
        .unwrap();
        assert!(v.vacuous && v.value == 1.0);
    }

    #[test]
    fn wilson_extremes() {
        let (lo, hi) = wilson_interval(0, 100, Z_95);
        assert_eq!(lo, 0.0);
        assert!(hi < 0.04);
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo > 0.96);
        assert_eq!(hi, 1.0);
    }

    #[test]
    fn ks_self_calibration() {
        let r = ks_self_test(2.0, 5000, 7).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(exponential_functional_law_check(1.0, 10, 1e-2, 0).is_err());
    }
}
