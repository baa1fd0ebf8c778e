//! Bessel functions of the first kind of real order and their positive zeros.

use super::gamma::ln_gamma;
use crate::error::{Error, Result};

const RESCALE_ABOVE: f64 = 1e250;
const SCAN_STEP: f64 = 0.25;

/// J_ν(x) split as (sign, ln|J_ν(x)|), so huge orders do not underflow.
///
/// Valid for ν > -1 and x > 0. A value of exactly zero has sign 0.
pub fn bessel_j_log(nu: f64, x: f64) -> Result<(f64, f64)> {
    if !(nu > -1.0) || !nu.is_finite() {
        return Err(Error::param("order", format!("must exceed -1, got {nu}")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::param("x", format!("must be positive, got {x}")));
    }
    if x <= 2.0 {
        Ok(series_log(nu, x))
    } else {
        Ok(miller_log(nu, x))
    }
}

/// J_ν(x) for ν > -1, x ≥ 0.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    if x == 0.0 && nu > -1.0 {
        return Ok(if nu == 0.0 {
            1.0
        } else if nu > 0.0 {
            0.0
        } else {
            f64::INFINITY
        });
    }
    let (s, l) = bessel_j_log(nu, x)?;
    Ok(s * l.exp())
}

fn series_log(nu: f64, x: f64) -> (f64, f64) {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= q / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    let ln_pref = nu * (0.5 * x).ln() - ln_gamma(nu + 1.0);
    if sum == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    (sum.signum(), ln_pref + sum.abs().ln())
}

/// Backward recurrence from a high order, normalized with the identity
/// (x/2)^ν / Γ(ν+1) = J_ν + Σ_{k≥1} (ν+2k) Γ(ν+k) / (k! Γ(ν+1)) J_{ν+2k}.
fn miller_log(nu: f64, x: f64) -> (f64, f64) {
    let span = (x + 30.0 + (40.0 * x).sqrt()).ceil() as usize;
    let top = span + span % 2;
    let mut f = vec![0.0f64; top + 2];
    f[top] = 1e-30;
    for j in (1..=top).rev() {
        let next = 2.0 * (nu + j as f64) / x * f[j] - f[j + 1];
        f[j - 1] = next;
        if next.abs() > RESCALE_ABOVE {
            for v in f[j - 1..].iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    // Log-domain weights ln(r_k) with r_0 = 1 and r_k = (ν+2k) g_k.
    let mut logs = Vec::with_capacity(top / 2 + 1);
    let mut signs = Vec::with_capacity(top / 2 + 1);
    let mut ln_g = 0.0; // g_1 = 1
    for k in 0..=top / 2 {
        let fv = f[2 * k];
        if k >= 2 {
            let kf = (k - 1) as f64;
            ln_g += ((nu + kf) / (kf + 1.0)).ln();
        }
        if fv == 0.0 {
            continue;
        }
        let ln_r = if k == 0 { 0.0 } else { (nu + 2.0 * k as f64).ln() + ln_g };
        logs.push(ln_r + fv.abs().ln());
        signs.push(fv.signum());
    }
    let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (l, s) in logs.iter().zip(&signs) {
        sum += s * (l - peak).exp();
    }
    let f0 = f[0];
    if f0 == 0.0 || sum == 0.0 {
        return (0.0, f64::NEG_INFINITY);
    }
    let ln_abs = f0.abs().ln() + nu * (0.5 * x).ln() - ln_gamma(nu + 1.0) - peak - sum.abs().ln();
    (f0.signum() * sum.signum(), ln_abs)
}

fn sign_at(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_j_log(nu, x)?.0)
}

/// McMahon's large-zero expansion for the `s`-th positive zero of J_ν.
pub fn mcmahon_zero(nu: f64, s: usize) -> f64 {
    let mu = 4.0 * nu * nu;
    let beta = (s as f64 + 0.5 * nu - 0.25) * std::f64::consts::PI;
    let e = 8.0 * beta;
    beta - (mu - 1.0) / e
        - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
        - 32.0 * (mu - 1.0) * (83.0 * mu * mu - 982.0 * mu + 3779.0) / (15.0 * e.powi(5))
}

/// First `count` positive zeros of J_ν, ν > -1, in increasing order.
///
/// Each zero is bracketed by a forward sign scan that starts just past the
/// previous zero (or below the known lower bound √(ν(ν+2)) for the first),
/// then refined by bisection to machine precision.
pub fn bessel_j_zeros(nu: f64, count: usize) -> Result<Vec<f64>> {
    if !(nu > -1.0) {
        return Err(Error::param("order", format!("must exceed -1, got {nu}")));
    }
    let mut zeros = Vec::with_capacity(count);
    let mut lo = if nu > 0.0 {
        (nu * (nu + 2.0)).sqrt().max(1e-9)
    } else {
        1e-9
    };
    let mut s_lo = sign_at(nu, lo)?;
    while zeros.len() < count {
        let limit = lo + 20.0 + nu.abs();
        let mut hi = lo;
        let mut s_hi = s_lo;
        while s_hi == s_lo {
            hi += SCAN_STEP;
            if hi > limit {
                return Err(Error::Numerical(format!(
                    "no sign change of J_{nu} found in [{lo}, {limit}]"
                )));
            }
            s_hi = sign_at(nu, hi)?;
            if s_hi == 0.0 {
                break;
            }
        }
        let root = if s_hi == 0.0 { hi } else { bisect(nu, lo, hi, s_lo)? };
        zeros.push(root);
        lo = root + 1e-6 * root.max(1.0);
        s_lo = sign_at(nu, lo)?;
        if s_lo == 0.0 {
            lo += 1e-6;
            s_lo = sign_at(nu, lo)?;
        }
    }
    Ok(zeros)
}

fn bisect(nu: f64, mut a: f64, mut b: f64, s_a: f64) -> Result<f64> {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let s = sign_at(nu, m)?;
        if s == 0.0 {
            return Ok(m);
        }
        if s == s_a {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn half_integer_orders_are_elementary() {
        for &x in &[0.3, 1.7, 2.5, 9.0, 40.0, 123.4] {
            let j_half = (2.0 / (PI * x)).sqrt() * x.sin();
            let j_mhalf = (2.0 / (PI * x)).sqrt() * x.cos();
            assert!((bessel_j(0.5, x).unwrap() - j_half).abs() < 1e-12, "x = {x}");
            assert!((bessel_j(-0.5, x).unwrap() - j_mhalf).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn integer_order_reference_values() {
        assert!((bessel_j(0.0, 1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(0.0, 10.0).unwrap() + 0.245_935_764_451_348_3).abs() < 1e-13);
        assert!((bessel_j(1.0, 5.0).unwrap() + 0.327_579_137_591_465_2).abs() < 1e-13);
        assert!((bessel_j(2.0, 30.0).unwrap() - 0.078_451_246_073_265_38).abs() < 1e-12);
    }

    #[test]
    fn series_and_recurrence_agree_near_switch() {
        for &nu in &[-0.7, 0.0, 0.3, 2.5, 7.0] {
            let (s1, l1) = series_log(nu, 2.0);
            let (s2, l2) = miller_log(nu, 2.0);
            assert_eq!(s1, s2);
            assert!((l1 - l2).abs() < 1e-12, "nu = {nu}");
        }
    }

    #[test]
    fn zero_reference_values() {
        let z0 = bessel_j_zeros(0.0, 3).unwrap();
        assert!((z0[0] - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((z0[1] - 5.520_078_110_286_311).abs() < 1e-12);
        assert!((z0[2] - 8.653_727_912_911_012).abs() < 1e-12);
        let z1 = bessel_j_zeros(1.0, 1).unwrap();
        assert!((z1[0] - 3.831_705_970_207_512).abs() < 1e-12);
        let zh = bessel_j_zeros(0.5, 30).unwrap();
        for (i, z) in zh.iter().enumerate() {
            assert!((z - (i + 1) as f64 * PI).abs() < 1e-10);
        }
        let zm = bessel_j_zeros(-0.5, 5).unwrap();
        for (i, z) in zm.iter().enumerate() {
            assert!((z - (i as f64 + 0.5) * PI).abs() < 1e-10);
        }
    }

    #[test]
    fn large_order_zeros_match_mcmahon_asymptotically() {
        let z = bessel_j_zeros(40.0, 80).unwrap();
        assert!(z[0] > 40.0);
        let last = z[79];
        assert!((last - mcmahon_zero(40.0, 80)).abs() < 1e-3 * last);
        for w in z.windows(2) {
            assert!(w[1] > w[0]);
        }
    }
}
