//! Numerical integration helpers shared by every module.

use crate::error::{Error, Result};

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let pair = f(c - dx) + f(c + dx);
        kron += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate falls below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical("integration limits must be finite".into()));
    }
    let (v, e) = gk15(&f, a, b);
    let mut segments = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    for _ in 0..4000 {
        if !total.is_finite() {
            return Err(Error::Numerical("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (sa, sb, sv, se) = segments.swap_remove(idx);
        let mid = 0.5 * (sa + sb);
        let (lv, le) = gk15(&f, sa, mid);
        let (rv, re) = gk15(&f, mid, sb);
        total += lv + rv - sv;
        err += le + re - se;
        segments.push((sa, mid, lv, le));
        segments.push((mid, sb, rv, re));
    }
    // Recompute from scratch to shed accumulated rounding before judging.
    let total: f64 = kahan_sum(segments.iter().map(|s| s.2));
    let err: f64 = segments.iter().map(|s| s.3).sum();
    if err <= 10.0 * abs_tol.max(rel_tol * total.abs()) {
        Ok(total)
    } else {
        Err(Error::Numerical(format!(
            "adaptive quadrature did not converge (error estimate {err:e})"
        )))
    }
}

/// Compensated summation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Cumulative trapezoid integral on a uniform grid; element `i` is the
/// integral over `[0, i * dt]`.
pub fn cumulative_trapezoid(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// First time at which a cumulative integral reaches `threshold`, with the
/// crossing located by linear interpolation inside the grid cell.
///
/// Returns `f64::INFINITY` when the threshold is never reached.
pub fn first_crossing(times: &[f64], cumulative: &[f64], threshold: f64) -> f64 {
    if cumulative.is_empty() {
        return f64::INFINITY;
    }
    if cumulative[0] >= threshold {
        return times[0];
    }
    for i in 1..cumulative.len() {
        if cumulative[i] >= threshold {
            let (c0, c1) = (cumulative[i - 1], cumulative[i]);
            let frac = if c1.is_finite() && c1 > c0 {
                ((threshold - c0) / (c1 - c0)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            return times[i - 1] + frac * (times[i] - times[i - 1]);
        }
    }
    f64::INFINITY
}

/// Integral of `exp(a + b s)` over `[0, h]`, stable for small `b h`.
pub fn exp_linear_integral(a: f64, b: f64, h: f64) -> f64 {
    let x = b * h;
    let factor = if x.abs() < 1e-8 {
        h * (1.0 + 0.5 * x + x * x / 6.0)
    } else {
        h * x.exp_m1() / x
    };
    a.exp() * factor
}
