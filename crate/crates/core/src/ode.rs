//! Adaptive Dormand-Prince 5(4) integration of scalar ODEs.

use crate::error::{Error, Result};

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates y' = f(t, y) from `t0` to `t1` and returns y(t1).
pub fn dopri5<F: Fn(f64, f64) -> f64>(f: F, t0: f64, y0: f64, t1: f64, rtol: f64, atol: f64) -> Result<f64> {
    if t1 == t0 {
        return Ok(y0);
    }
    let span = t1 - t0;
    let mut h = span / 16.0;
    let mut t = t0;
    let mut y = y0;
    for _ in 0..1_000_000 {
        if (t1 - t) <= 1e-15 * span.abs().max(1.0) {
            return Ok(y);
        }
        if h > t1 - t {
            h = t1 - t;
        }
        let mut k = [0.0f64; 7];
        k[0] = f(t, y);
        for s in 1..7 {
            let mut yi = y;
            for j in 0..s {
                yi += h * A[s - 1][j] * k[j];
            }
            k[s] = f(t + C[s] * h, yi);
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5 += h * B5[s] * k[s];
            y4 += h * B4[s] * k[s];
        }
        let scale = atol + rtol * y.abs().max(y5.abs());
        let err = ((y5 - y4) / scale).abs();
        if !y5.is_finite() {
            h *= 0.25;
            if h < 1e-300 {
                return Err(Error::Numerical("ODE solution left the finite range".into()));
            }
            continue;
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Err(Error::Numerical("ODE integration exceeded the step budget".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_and_riccati() {
        let y = dopri5(|_, y| -2.0 * y, 0.0, 1.0, 1.5, 1e-12, 0.0).unwrap();
        assert!((y - (-3.0f64).exp()).abs() < 1e-12);
        // y' = y², y(0) = 1 blows up at t = 1.
        let y = dopri5(|_, y| y * y, 0.0, 1.0, 0.9, 1e-12, 0.0).unwrap();
        assert!((y - 10.0).abs() < 1e-9);
    }
}
