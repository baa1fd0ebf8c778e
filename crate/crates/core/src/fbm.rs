//! Fractional Brownian motion: covariance, Volterra kernel, seeded path
//! sampling and pathwise functionals.

use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::quadrature::{cumulative_trapezoid, integrate};

/// Hurst index restricted to the long-memory range `[0.5, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(h: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&h) {
            return Err(Error::param("hurst", format!("must lie in [0.5, 1), got {h}")));
        }
        Ok(Hurst(h))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True for standard Brownian motion.
    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

/// Uniform grid `0 = t_0 < … < t_n = t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_max: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::param("t_max", format!("must be positive, got {t_max}")));
        }
        if n_steps < 1 {
            return Err(Error::param("n_steps", "must be at least 1"));
        }
        Ok(TimeGrid { t_max, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.t_max
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    CirculantEmbedding,
    Cholesky,
}

/// A sampled path on a [`TimeGrid`], `values[0] == 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: Hurst,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed: u64,
    /// Method that actually produced the path (after any fallback).
    pub method: SamplingMethod,
}

impl FbmPath {
    /// The identically zero path, used for deterministic runs.
    pub fn zeros(hurst: Hurst, grid: TimeGrid) -> Self {
        FbmPath {
            hurst,
            grid,
            values: vec![0.0; grid.n_steps + 1],
            seed: 0,
            method: SamplingMethod::Cholesky,
        }
    }

    /// Piecewise-linear interpolation; clamps beyond the grid end.
    pub fn value_at(&self, t: f64) -> f64 {
        let dt = self.grid.dt();
        if t <= 0.0 {
            return self.values[0];
        }
        let x = t / dt;
        let i = x.floor() as usize;
        if i >= self.grid.n_steps {
            return self.values[self.grid.n_steps];
        }
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.nodes()
    }

    /// Two-column CSV: `t,B`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,B")?;
        for (i, b) in self.values.iter().enumerate() {
            writeln!(out, "{:.12e},{:.12e}", self.grid.node(i), b)?;
        }
        Ok(())
    }
}

/// E[B_t B_s] = ½(t^{2H} + s^{2H} − |t−s|^{2H}).
pub fn covariance(hurst: Hurst, t: f64, s: f64) -> Result<f64> {
    if t < 0.0 || s < 0.0 {
        return Err(Error::param("time", "covariance needs t, s ≥ 0"));
    }
    let h2 = 2.0 * hurst.0;
    Ok(0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2)))
}

/// Square-integrable kernel with B_t = ∫₀ᵗ K(t,s) dW_s.
///
/// The multiplicative constant is fixed numerically so that
/// ∫₀ᵗ K(t,θ)² dθ = t^{2H}; for H = ½ the kernel is identically one.
#[derive(Debug, Clone, Copy)]
pub struct VolterraKernel {
    hurst: Hurst,
    scale: f64,
}

impl VolterraKernel {
    pub fn new(hurst: Hurst) -> Result<Self> {
        if hurst.is_brownian() {
            return Ok(VolterraKernel { hurst, scale: 1.0 });
        }
        let a = hurst.0 - 0.5;
        let raw = VolterraKernel { hurst, scale: 1.0 };
        // θ = z^β removes the θ^{-2a} endpoint behaviour of K².
        let beta = 1.0 / (1.0 - 2.0 * a);
        let norm = integrate(
            |z| {
                if z <= 0.0 {
                    return 0.0;
                }
                let theta = z.powf(beta);
                let k = raw.unscaled(1.0, theta).unwrap_or(f64::NAN);
                k * k * beta * z.powf(beta - 1.0)
            },
            0.0,
            1.0,
            1e-15,
            1e-13,
        )?;
        Ok(VolterraKernel {
            hurst,
            scale: 1.0 / norm.sqrt(),
        })
    }

    pub fn hurst(&self) -> Hurst {
        self.hurst
    }

    /// Normalizing constant in front of the bracket.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// K(t, s) for 0 < s < t; zero for s ≥ t.
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::param("s", format!("kernel needs s > 0, got {s}")));
        }
        if s >= t {
            return Ok(0.0);
        }
        Ok(self.scale * self.unscaled(t, s)?)
    }

    fn unscaled(&self, t: f64, s: f64) -> Result<f64> {
        let a = self.hurst.0 - 0.5;
        if a == 0.0 {
            return Ok(1.0);
        }
        let lead = (t / s).powf(a) * (t - s).powf(a);
        // u − s = y^{1/(a+1)} turns (u−s)^a du into dy/(a+1).
        let e = 1.0 / (a + 1.0);
        let upper = (t - s).powf(a + 1.0);
        let inner = integrate(|y| (s + y.powf(e)).powf(a - 1.0), 0.0, upper, 1e-300, 1e-14)? * e;
        Ok(lead - a * s.powf(-a) * inner)
    }
}

/// K(t, s) with a freshly computed normalization.
pub fn volterra_kernel(hurst: Hurst, t: f64, s: f64) -> Result<f64> {
    VolterraKernel::new(hurst)?.eval(t, s)
}

/// Seed for replicate `index`, derived from `master` by a SplitMix64 step.
///
/// SplitMix64's output mix is a bijection, so distinct indices never share
/// a seed within one master stream.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normals(rng: &mut ChaCha20Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn fgn_autocovariance(h2: f64, k: usize) -> f64 {
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Eigenvalues of the minimal circulant embedding of unit-step fGn.
fn circulant_eigenvalues(hurst: Hurst, n: usize) -> Vec<f64> {
    let h2 = 2.0 * hurst.0;
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= n { j } else { m - j };
            Complex::new(fgn_autocovariance(h2, k), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut row);
    row.iter().map(|c| c.re).collect()
}

fn sample_circulant(hurst: Hurst, grid: TimeGrid, rng: &mut ChaCha20Rng) -> Option<Vec<f64>> {
    let n = grid.n_steps;
    let m = 2 * n;
    let eig = circulant_eigenvalues(hurst, n);
    let peak = eig.iter().cloned().fold(0.0, f64::max);
    if eig.iter().any(|&l| l < -1e-10 * peak.max(1.0)) {
        return None;
    }
    let z = normals(rng, 2 * m);
    let mut buf: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            let w = (eig[k].max(0.0) / m as f64).sqrt();
            Complex::new(w * z[2 * k], w * z[2 * k + 1])
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    let step_scale = grid.dt().powf(hurst.0);
    Some(increments_to_path(buf[..n].iter().map(|c| c.re * step_scale)))
}

fn sample_cholesky(hurst: Hurst, grid: TimeGrid, rng: &mut ChaCha20Rng) -> Result<Vec<f64>> {
    let n = grid.n_steps;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        covariance(hurst, grid.node(i + 1), grid.node(j + 1)).unwrap_or(f64::NAN)
    });
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numerical("fBm covariance is not positive definite".into()))?;
    let z = nalgebra::DVector::from_vec(normals(rng, n));
    let b = chol.l() * z;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    values.extend(b.iter());
    Ok(values)
}

fn increments_to_path<I: Iterator<Item = f64>>(incs: I) -> Vec<f64> {
    let mut values = vec![0.0];
    let mut acc = 0.0;
    for x in incs {
        acc += x;
        values.push(acc);
    }
    values
}

/// Draws one path, deterministic in `seed`.
///
/// Circulant embedding falls back to Cholesky when the embedding has a
/// negative eigenvalue; the method used is recorded on the path.
pub fn sample_path(hurst: Hurst, grid: TimeGrid, seed: u64, method: SamplingMethod) -> Result<FbmPath> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (values, used) = match method {
        SamplingMethod::CirculantEmbedding => match sample_circulant(hurst, grid, &mut rng) {
            Some(v) => (v, SamplingMethod::CirculantEmbedding),
            None => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                (sample_cholesky(hurst, grid, &mut rng)?, SamplingMethod::Cholesky)
            }
        },
        SamplingMethod::Cholesky => (sample_cholesky(hurst, grid, &mut rng)?, SamplingMethod::Cholesky),
    };
    Ok(FbmPath {
        hurst,
        grid,
        values,
        seed,
        method: used,
    })
}

/// Independent replicates with seeds from [`replicate_seed`].
pub fn sample_ensemble(
    hurst: Hurst,
    grid: TimeGrid,
    master_seed: u64,
    count: usize,
    method: SamplingMethod,
) -> Result<Vec<FbmPath>> {
    (0..count)
        .into_par_iter()
        .map(|i| sample_path(hurst, grid, replicate_seed(master_seed, i as u64), method))
        .collect()
}

/// Cell-averaged kernel weights for discretizing B_t = ∫ K(t,θ) dW_θ.
/// Quadratic cost; a cross-check for the production sampler.
#[derive(Debug, Clone)]
pub struct VolterraSampler {
    hurst: Hurst,
    grid: TimeGrid,
    /// Row i − 1 holds the mean of K(tᵢ, ·) over cells 0..i.
    weights: Vec<Vec<f64>>,
}

impl VolterraSampler {
    pub fn new(kernel: &VolterraKernel, grid: TimeGrid) -> Result<Self> {
        let dt = grid.dt();
        let weights = (1..=grid.n_steps)
            .into_par_iter()
            .map(|i| {
                let t = grid.node(i);
                (0..i)
                    .map(|j| {
                        let (a, b) = (grid.node(j), grid.node(j + 1));
                        integrate(|th| kernel.eval(t, th.max(1e-300)).unwrap_or(0.0), a, b, 1e-12, 1e-8).map(|v| v / dt)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VolterraSampler {
            hurst: kernel.hurst(),
            grid,
            weights,
        })
    }

    pub fn sample(&self, seed: u64) -> FbmPath {
        let dt = self.grid.dt();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dw: Vec<f64> = normals(&mut rng, self.grid.n_steps)
            .into_iter()
            .map(|z| z * dt.sqrt())
            .collect();
        let mut values = vec![0.0; self.grid.n_steps + 1];
        for (i, row) in self.weights.iter().enumerate() {
            values[i + 1] = row.iter().zip(&dw).map(|(k, w)| k * w).sum();
        }
        FbmPath {
            hurst: self.hurst,
            grid: self.grid,
            values,
            seed,
            method: SamplingMethod::Cholesky,
        }
    }
}

/// One path from [`VolterraSampler`]; rebuilds the weights on every call.
pub fn sample_path_volterra(kernel: &VolterraKernel, grid: TimeGrid, seed: u64) -> Result<FbmPath> {
    Ok(VolterraSampler::new(kernel, grid)?.sample(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpIntegral {
    pub sigma: f64,
    pub nu: f64,
    pub values: Vec<f64>,
    /// Natural log of `values`, always available and overflow free.
    pub log_values: Vec<f64>,
    /// Whether the accumulation was carried out in log space.
    pub log_space: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    /// sup_{s ≤ t_i} |B_s|.
    pub running_sup: Vec<f64>,
    pub exp_integrals: Vec<ExpIntegral>,
}

impl PathFunctionals {
    pub fn exp_integral(&self, sigma: f64, nu: f64) -> Option<&ExpIntegral> {
        self.exp_integrals.iter().find(|e| e.sigma == sigma && e.nu == nu)
    }
}

const LOG_SPACE_ABOVE: f64 = 500.0;

/// Running supremum and trapezoid exponential functionals of `path`.
pub fn path_functionals(path: &FbmPath, pairs: &[(f64, f64)]) -> PathFunctionals {
    let mut running_sup = Vec::with_capacity(path.values.len());
    let mut sup = 0.0f64;
    for b in &path.values {
        sup = sup.max(b.abs());
        running_sup.push(sup);
    }
    let times = path.times();
    let dt = path.grid.dt();
    let exp_integrals = pairs
        .iter()
        .map(|&(sigma, nu)| {
            let exponents: Vec<f64> = path
                .values
                .iter()
                .zip(&times)
                .map(|(b, t)| sigma * b - nu * t)
                .collect();
            let log_space = sigma.abs() * sup > LOG_SPACE_ABOVE;
            if log_space {
                let log_values = log_cumulative_trapezoid(&exponents, dt);
                ExpIntegral {
                    sigma,
                    nu,
                    values: log_values.iter().map(|l| l.exp()).collect(),
                    log_values,
                    log_space,
                }
            } else {
                let vals: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
                let values = cumulative_trapezoid(&vals, dt);
                ExpIntegral {
                    sigma,
                    nu,
                    log_values: values.iter().map(|v| v.ln()).collect(),
                    values,
                    log_space,
                }
            }
        })
        .collect();
    PathFunctionals {
        running_sup,
        exp_integrals,
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Trapezoid accumulation of exp(exponents) carried entirely in logs.
pub fn log_cumulative_trapezoid(exponents: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(exponents.len());
    let mut acc = f64::NEG_INFINITY;
    out.push(acc);
    let ln_half_dt = (0.5 * dt).ln();
    for w in exponents.windows(2) {
        let cell = ln_half_dt + log_add(w[0], w[1]);
        acc = log_add(acc, cell);
        out.push(acc);
    }
    out.truncate(exponents.len());
    out
}

/// Fraction of paths with |B(T)| ≤ (1+ε) T^H √(2 log log T).
pub fn lil_diagnostic(ensemble: &[FbmPath], epsilon: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut inside = 0usize;
    for path in ensemble {
        let t = path.grid.t_max;
        if t <= std::f64::consts::E {
            return Err(Error::param(
                "t_max",
                format!("iterated-log envelope needs t_max > e, got {t}"),
            ));
        }
        let envelope = (1.0 + epsilon) * t.powf(path.hurst.0) * (2.0 * t.ln().ln()).sqrt();
        if path.values[path.grid.n_steps].abs() <= envelope {
            inside += 1;
        }
    }
    Ok(inside as f64 / ensemble.len() as f64)
}
