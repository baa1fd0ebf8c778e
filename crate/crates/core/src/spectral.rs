//! Dirichlet Laplacian on an interval or rectangle: grid, analytic eigenpairs,
//! heat semigroup and heat-kernel envelope fitting.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};

/// Geometry and resolution of the spatial domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Interval { length: f64, n_cells: usize },
    Rectangle { lx: f64, ly: f64, nx: usize, ny: usize },
}

impl DomainSpec {
    pub fn interval(length: f64, n_cells: usize) -> Self {
        DomainSpec::Interval { length, n_cells }
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        DomainSpec::Rectangle { lx, ly, nx, ny }
    }

    pub fn validate(&self) -> Result<()> {
        let check_len = |name: &'static str, l: f64| {
            if l > 0.0 && l.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {l}")))
            }
        };
        let check_cells = |name: &'static str, n: usize| {
            if n >= 2 {
                Ok(())
            } else {
                Err(Error::param(name, format!("need at least 2 cells, got {n}")))
            }
        };
        match *self {
            DomainSpec::Interval { length, n_cells } => {
                check_len("length", length)?;
                check_cells("n_cells", n_cells)
            }
            DomainSpec::Rectangle { lx, ly, nx, ny } => {
                check_len("lx", lx)?;
                check_len("ly", ly)?;
                check_cells("nx", nx)?;
                check_cells("ny", ny)
            }
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            DomainSpec::Rectangle { .. } => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            DomainSpec::Interval { length, .. } => length,
            DomainSpec::Rectangle { lx, ly, .. } => lx * ly,
        }
    }

    /// Same geometry with every cell count multiplied by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        match *self {
            DomainSpec::Interval { length, n_cells } => DomainSpec::Interval {
                length,
                n_cells: n_cells * factor,
            },
            DomainSpec::Rectangle { lx, ly, nx, ny } => DomainSpec::Rectangle {
                lx,
                ly,
                nx: nx * factor,
                ny: ny * factor,
            },
        }
    }
}

/// A point of the domain; the second coordinate is ignored on intervals.
pub type Point = [f64; 2];

/// Validated domain with node coordinates and trapezoid weights.
///
/// Nodes include the boundary; on rectangles they are stored row by row
/// with index `j * (nx + 1) + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    spec: DomainSpec,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    weights: Vec<f64>,
}

impl Domain {
    pub fn new(spec: DomainSpec) -> Result<Self> {
        spec.validate()?;
        let (nx, ny, hx, hy) = match spec {
            DomainSpec::Interval { length, n_cells } => (n_cells, 0, length / n_cells as f64, 1.0),
            DomainSpec::Rectangle { lx, ly, nx, ny } => (nx, ny, lx / nx as f64, ly / ny as f64),
        };
        let wx: Vec<f64> = (0..=nx)
            .map(|i| if i == 0 || i == nx { 0.5 * hx } else { hx })
            .collect();
        let weights = if ny == 0 {
            wx
        } else {
            let mut w = Vec::with_capacity((nx + 1) * (ny + 1));
            for j in 0..=ny {
                let wy = if j == 0 || j == ny { 0.5 * hy } else { hy };
                w.extend(wx.iter().map(|a| a * wy));
            }
            w
        };
        Ok(Domain {
            spec,
            nx,
            ny,
            hx,
            hy,
            weights,
        })
    }

    pub fn spec(&self) -> DomainSpec {
        self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn volume(&self) -> f64 {
        self.spec.volume()
    }

    pub fn n_nodes(&self) -> usize {
        self.weights.len()
    }

    /// Smallest mesh width.
    pub fn spacing(&self) -> f64 {
        if self.ny == 0 {
            self.hx
        } else {
            self.hx.min(self.hy)
        }
    }

    /// Σ 1/h_i², the diffusion stiffness per unit coefficient.
    pub fn inverse_spacing_sq(&self) -> f64 {
        if self.ny == 0 {
            1.0 / (self.hx * self.hx)
        } else {
            1.0 / (self.hx * self.hx) + 1.0 / (self.hy * self.hy)
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        if self.ny == 0 {
            [idx as f64 * self.hx, 0.0]
        } else {
            let i = idx % (self.nx + 1);
            let j = idx / (self.nx + 1);
            [i as f64 * self.hx, j as f64 * self.hy]
        }
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        if self.ny == 0 {
            idx == 0 || idx == self.nx
        } else {
            let i = idx % (self.nx + 1);
            let j = idx / (self.nx + 1);
            i == 0 || i == self.nx || j == 0 || j == self.ny
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoid approximation of ∫_D f.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// Trapezoid approximation of ∫_D f g.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    /// Five-point (three-point in 1D) Laplacian with homogeneous Dirichlet
    /// data; boundary entries of `out` are set to zero.
    pub fn laplacian(&self, v: &[f64], out: &mut [f64]) {
        let nx = self.nx;
        if self.ny == 0 {
            let c = 1.0 / (self.hx * self.hx);
            out[0] = 0.0;
            out[nx] = 0.0;
            for i in 1..nx {
                out[i] = c * (v[i - 1] - 2.0 * v[i] + v[i + 1]);
            }
        } else {
            let cx = 1.0 / (self.hx * self.hx);
            let cy = 1.0 / (self.hy * self.hy);
            let row = nx + 1;
            for j in 0..=self.ny {
                for i in 0..=nx {
                    let k = j * row + i;
                    out[k] = if i == 0 || i == nx || j == 0 || j == self.ny {
                        0.0
                    } else {
                        cx * (v[k - 1] - 2.0 * v[k] + v[k + 1]) + cy * (v[k - row] - 2.0 * v[k] + v[k + row])
                    };
                }
            }
        }
    }

    fn interior_mode_count(&self) -> usize {
        if self.ny == 0 {
            self.nx - 1
        } else {
            (self.nx - 1) * (self.ny - 1)
        }
    }
}

/// Quantum numbers of a Dirichlet eigenfunction (second is 0 on intervals).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex(pub usize, pub usize);

/// Analytic Dirichlet eigenpairs sampled on a [`Domain`].
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    domain: Domain,
    eigenvalues: Vec<f64>,
    indices: Vec<ModeIndex>,
    /// L²-normalized eigenfunctions at the nodes.
    modes: Vec<Vec<f64>>,
    /// Principal eigenfunction scaled so that its grid integral is one.
    phi: Vec<f64>,
    phi_sup: f64,
}

fn mode_value(spec: DomainSpec, idx: ModeIndex, p: Point) -> f64 {
    match spec {
        DomainSpec::Interval { length, .. } => (2.0 / length).sqrt() * (idx.0 as f64 * PI * p[0] / length).sin(),
        DomainSpec::Rectangle { lx, ly, .. } => {
            (4.0 / (lx * ly)).sqrt() * (idx.0 as f64 * PI * p[0] / lx).sin() * (idx.1 as f64 * PI * p[1] / ly).sin()
        }
    }
}

fn mode_eigenvalue(spec: DomainSpec, idx: ModeIndex) -> f64 {
    match spec {
        DomainSpec::Interval { length, .. } => (idx.0 as f64 * PI / length).powi(2),
        DomainSpec::Rectangle { lx, ly, .. } => (idx.0 as f64 * PI / lx).powi(2) + (idx.1 as f64 * PI / ly).powi(2),
    }
}

/// Lowest `n_modes` eigenpairs of −Δ with Dirichlet data, sorted by
/// eigenvalue.
pub fn build_basis(spec: DomainSpec, n_modes: usize) -> Result<SpectralBasis> {
    let domain = Domain::new(spec)?;
    let available = domain.interior_mode_count();
    if n_modes < 2 || n_modes > available {
        return Err(Error::param(
            "n_modes",
            format!("need 2 ≤ n_modes ≤ {available} for this grid, got {n_modes}"),
        ));
    }
    let mut candidates: Vec<ModeIndex> = match spec {
        DomainSpec::Interval { n_cells, .. } => (1..n_cells).map(|k| ModeIndex(k, 0)).collect(),
        DomainSpec::Rectangle { nx, ny, .. } => (1..nx).flat_map(|i| (1..ny).map(move |j| ModeIndex(i, j))).collect(),
    };
    candidates.sort_by(|a, b| {
        mode_eigenvalue(spec, *a)
            .total_cmp(&mode_eigenvalue(spec, *b))
            .then(a.0.cmp(&b.0))
    });
    candidates.truncate(n_modes);
    let eigenvalues: Vec<f64> = candidates.iter().map(|&m| mode_eigenvalue(spec, m)).collect();
    let modes: Vec<Vec<f64>> = candidates
        .iter()
        .map(|&m| {
            (0..domain.n_nodes())
                .map(|k| {
                    if domain.is_boundary(k) {
                        0.0
                    } else {
                        mode_value(spec, m, domain.point(k))
                    }
                })
                .collect()
        })
        .collect();
    let mass = domain.integrate(&modes[0]);
    let phi: Vec<f64> = modes[0].iter().map(|v| v / mass).collect();
    let phi_sup = phi.iter().cloned().fold(0.0, f64::max);
    Ok(SpectralBasis {
        domain,
        eigenvalues,
        indices: candidates,
        modes,
        phi,
        phi_sup,
    })
}

impl SpectralBasis {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda2(&self) -> f64 {
        self.eigenvalues[1]
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, k: usize) -> &[f64] {
        &self.modes[k]
    }

    pub fn mode_index(&self, k: usize) -> ModeIndex {
        self.indices[k]
    }

    /// Principal eigenfunction with unit integral.
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn phi_sup(&self) -> f64 {
        self.phi_sup
    }

    /// ê_k at an arbitrary point.
    pub fn mode_at(&self, k: usize, p: Point) -> f64 {
        mode_value(self.domain.spec, self.indices[k], p)
    }

    /// ∫ φ^s on the grid.
    pub fn phi_power_integral(&self, s: f64) -> f64 {
        let pw: Vec<f64> = self.phi.iter().map(|v| v.max(0.0).powf(s)).collect();
        self.domain.integrate(&pw)
    }

    /// Coefficients (f, ê_k) under the grid quadrature.
    pub fn project(&self, f: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|m| self.domain.inner(f, m)).collect()
    }

    fn synthesize(&self, coeffs: &[f64], t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.domain.n_nodes()];
        for ((c, lam), m) in coeffs.iter().zip(&self.eigenvalues).zip(&self.modes) {
            let a = c * (-lam * t).exp();
            if a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(m) {
                *o += a * v;
            }
        }
        out
    }

    /// Two-column-per-mode CSV: `node,phi,e1,e2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "node,phi,e1,e2")?;
        for k in 0..self.domain.n_nodes() {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e}",
                k, self.phi[k], self.modes[0][k], self.modes[1][k]
            )?;
        }
        Ok(())
    }
}

/// T_t f = Σ e^{−λ_k t} (f, ê_k) ê_k on the grid; `T_0 f = f`.
pub fn apply_semigroup(basis: &SpectralBasis, f: &[f64], t: f64) -> Result<Vec<f64>> {
    if f.len() != basis.domain.n_nodes() {
        return Err(Error::param(
            "f",
            format!("expected {} node values, got {}", basis.domain.n_nodes(), f.len()),
        ));
    }
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.to_vec());
    }
    Ok(basis.synthesize(&basis.project(f), t))
}

/// Precomputed projection of the constant function for repeated sup-norm
/// queries of the semigroup.
#[derive(Debug, Clone)]
pub struct SupNormEvaluator<'a> {
    basis: &'a SpectralBasis,
    ones: Vec<f64>,
}

impl<'a> SupNormEvaluator<'a> {
    pub fn new(basis: &'a SpectralBasis) -> Self {
        let one = vec![1.0; basis.domain.n_nodes()];
        SupNormEvaluator {
            ones: basis.project(&one),
            basis,
        }
    }

    /// e^{γt} sup_x (T_t 1)(x); the spectral sum is capped at the
    /// contraction bound 1 to suppress truncation ringing at small t.
    pub fn eval(&self, gamma: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 1.0;
        }
        let u = self.basis.synthesize(&self.ones, t);
        let sup = u.iter().cloned().fold(0.0, f64::max).min(1.0);
        (gamma * t).exp() * sup
    }
}

/// ‖e^{γt} T_t‖_{∞→∞} = e^{γt} sup_x T_t 1(x).
pub fn semigroup_sup_norm(basis: &SpectralBasis, gamma: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::param("t", format!("must be non-negative, got {t}")));
    }
    Ok(SupNormEvaluator::new(basis).eval(gamma, t))
}

/// Truncated heat kernel p_t(x, y) = Σ e^{−λ_k t} ê_k(x) ê_k(y).
pub fn heat_kernel(basis: &SpectralBasis, t: f64, x: Point, y: Point) -> f64 {
    (0..basis.n_modes())
        .map(|k| (-basis.eigenvalues[k] * t).exp() * (basis.mode_at(k, x) * basis.mode_at(k, y)))
        .sum()
}

/// Normalization used for the principal eigenfunction in the kernel ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelConvention {
    /// φ̃ with ∫φ̃² = 1, so the ratio tends to one for large t.
    L2Normalized,
}

/// Smallest c, on the sampled grid, with
/// max{1, c⁻¹ t^{−(d+2)/2}} ≤ S(t) ≤ 1 + c (1∧t)^{−(d+2)/2} e^{−(λ₂−λ₁)t},
/// where S(t) is the sampled supremum over (x, y) of e^{λ₁t} p_t / (φ̃ φ̃).
#[derive(Debug, Clone)]
pub struct KernelBoundFit {
    pub c: f64,
    pub violations: usize,
    pub convention: KernelConvention,
    pub t_samples: Vec<f64>,
    /// S(t) at each sampled time.
    pub sampled_sup: Vec<f64>,
    /// Smallest pointwise ratio over (x, y) at each time, for reporting.
    pub sampled_inf: Vec<f64>,
}

const KERNEL_BISECTION_TOL: f64 = 1e-3;

fn kernel_feasible(c: f64, t: f64, s: f64, d: f64, gap: f64) -> bool {
    let lower = 1.0f64.max(t.powf(-(d + 2.0) / 2.0) / c);
    let upper = 1.0 + c * t.min(1.0).powf(-(d + 2.0) / 2.0) * (-gap * t).exp();
    lower <= s * (1.0 + 1e-12) && s <= upper * (1.0 + 1e-12)
}

/// Fits the envelope constant by bisection on the (monotone) feasibility
/// predicate over the sampled times and point pairs.
pub fn fit_kernel_bound(basis: &SpectralBasis, t_samples: &[f64], points: &[Point]) -> Result<KernelBoundFit> {
    if t_samples.is_empty() || points.is_empty() {
        return Err(Error::param("samples", "need at least one time and one point"));
    }
    if t_samples.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::param("t_samples", "times must be positive"));
    }
    let d = basis.domain.dimension() as f64;
    let gap = basis.lambda2() - basis.lambda1();
    let lam1 = basis.lambda1();
    let phi_tilde: Vec<f64> = points.iter().map(|&p| basis.mode_at(0, p)).collect();
    if phi_tilde.iter().any(|v| !(v.abs() > 0.0)) {
        return Err(Error::param("points", "sample points must lie in the open domain"));
    }
    let mut sampled_sup = Vec::with_capacity(t_samples.len());
    let mut sampled_inf = Vec::with_capacity(t_samples.len());
    for &t in t_samples {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for (i, &x) in points.iter().enumerate() {
            for (j, &y) in points.iter().enumerate() {
                let r = (lam1 * t).exp() * heat_kernel(basis, t, x, y) / (phi_tilde[i] * phi_tilde[j]);
                hi = hi.max(r);
                lo = lo.min(r);
            }
        }
        sampled_sup.push(hi);
        sampled_inf.push(lo);
    }
    let feasible = |c: f64| {
        t_samples
            .iter()
            .zip(&sampled_sup)
            .all(|(&t, &s)| kernel_feasible(c, t, s, d, gap))
    };
    let mut hi = 1.0;
    while !feasible(hi) && hi < 1e15 {
        hi *= 2.0;
    }
    let c = if feasible(hi) {
        let mut lo = 0.0;
        while hi - lo > KERNEL_BISECTION_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    } else {
        f64::INFINITY
    };
    let violations = t_samples
        .iter()
        .zip(&sampled_sup)
        .filter(|&(&t, &s)| !kernel_feasible(c, t, s, d, gap))
        .count();
    Ok(KernelBoundFit {
        c,
        violations,
        convention: KernelConvention::L2Normalized,
        t_samples: t_samples.to_vec(),
        sampled_sup,
        sampled_inf,
    })
}

/// C₀ ‖φ‖∞² (1+c) e^{−(λ₁−γ)t}.
pub fn semigroup_decay_bound(basis: &SpectralBasis, gamma: f64, c: f64, c0: f64, t: f64) -> f64 {
    c0 * basis.phi_sup().powi(2) * (1.0 + c) * (-(basis.lambda1() - gamma) * t).exp()
}
