//! Resolvent kernels, generalized Fourier maps and the stationary wave and scattering operators.
//!
//! All maps act on [`GridFunction`]s, vector-valued samples paired with a quadrature rule. The
//! generalized eigenfunctions are `ψ±(k, x) = ψ(∓k, x)`, normalised so that for `V = 0` with the
//! Neumann condition both Fourier maps reduce to the cosine transform.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bc::{BcError, BoundaryPair, NormalForm};
use crate::linalg::{self, c, CMat, CVec, C64, I, ZERO};
use crate::ode::OdeOptions;
use crate::potential::PotentialSpec;
use crate::scattering::{check_channels, j0_tilde, phi0_tilde, scattering_matrix, ScatteringError};
use crate::solutions::{physical_parts, SolutionError};
use crate::spectral::{cell_averages, discrete_hamiltonian, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("z = {re} + {im}i is an eigenvalue of the free operator")]
    SpectralPoint { re: f64, im: f64 },
    #[error("I + Q is nearly singular (cond ≈ {cond:e}{})", distance.map(|d| format!(", estimated distance to a pole {d:e}")).unwrap_or_default())]
    NearSingularQ { cond: f64, distance: Option<f64> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl TransformError {
    pub fn name(&self) -> &'static str {
        match self {
            TransformError::Scattering(e) => e.name(),
            TransformError::Spectral(e) => e.name(),
            TransformError::SpectralPoint { .. } => "SpectralPoint",
            TransformError::NearSingularQ { .. } => "NearSingularQ",
            TransformError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

impl From<BcError> for TransformError {
    fn from(e: BcError) -> Self {
        TransformError::Scattering(e.into())
    }
}

impl From<SolutionError> for TransformError {
    fn from(e: SolutionError) -> Self {
        TransformError::Scattering(e.into())
    }
}

/// Where the resolvent is evaluated: off the positive axis, or a boundary value `λ ± i0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralParameter {
    Off { re: f64, im: f64 },
    Above(f64),
    Below(f64),
}

impl SpectralParameter {
    pub fn off(z: C64) -> Self {
        SpectralParameter::Off { re: z.re, im: z.im }
    }

    pub fn energy(&self) -> C64 {
        match *self {
            SpectralParameter::Off { re, im } => c(re, im),
            SpectralParameter::Above(l) | SpectralParameter::Below(l) => c(l, 0.0),
        }
    }

    /// `k` with `k² = z` and `Im k ≥ 0`; boundary values take `k = ±√λ`.
    pub fn wavenumber(&self) -> Result<C64, TransformError> {
        match *self {
            SpectralParameter::Off { re, im } => {
                if !(re.is_finite() && im.is_finite()) || (im == 0.0 && re >= 0.0) {
                    return Err(TransformError::InvalidArgument(format!(
                        "z = {re} + {im}i lies on [0, ∞); use a boundary value λ ± i0"
                    )));
                }
                let k = c(re, im).sqrt();
                Ok(if k.im < 0.0 { -k } else { k })
            }
            SpectralParameter::Above(l) | SpectralParameter::Below(l) => {
                if !(l > 0.0 && l.is_finite()) {
                    return Err(TransformError::InvalidArgument(format!("boundary value needs λ > 0, got {l}")));
                }
                Ok(if matches!(self, SpectralParameter::Above(_)) { c(l.sqrt(), 0.0) } else { c(-l.sqrt(), 0.0) })
            }
        }
    }
}

/// The free resolvent `R₀(z)` of the zero potential with the given vertex condition.
#[derive(Debug, Clone)]
pub struct FreeResolvent {
    nf: NormalForm,
    k: C64,
    j0_inv: Vec<C64>,
}

impl FreeResolvent {
    pub fn new(bp: &BoundaryPair, z: SpectralParameter) -> Result<Self, TransformError> {
        let k = z.wavenumber()?;
        let nf = bp.normal_form()?;
        let mut j0_inv = Vec::with_capacity(nf.n());
        for j in 0..nf.n() {
            let d = j0_tilde(&nf, j, k);
            if d.norm() < 1e-12 * (1.0 + k.norm()) {
                let e = z.energy();
                return Err(TransformError::SpectralPoint { re: e.re, im: e.im });
            }
            j0_inv.push(d.inv());
        }
        Ok(FreeResolvent { nf, k, j0_inv })
    }

    pub fn wavenumber(&self) -> C64 {
        self.k
    }

    /// `M φ̃₀(min(x,y)) e^{ik max(x,y)} J̃₀⁻¹ M†`.
    pub fn kernel(&self, x: f64, y: f64) -> CMat {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let e = (I * self.k * hi).exp();
        let d: Vec<C64> =
            self.j0_inv.iter().enumerate().map(|(j, inv)| phi0_tilde(&self.nf, j, self.k, lo) * e * inv).collect();
        &self.nf.m * linalg::diag(&d) * self.nf.m.adjoint()
    }
}

/// Kernel of `R₀(z)` at a single point pair.
pub fn free_resolvent_kernel(bp: &BoundaryPair, z: SpectralParameter, x: f64, y: f64) -> Result<CMat, TransformError> {
    check_point(x)?;
    check_point(y)?;
    Ok(FreeResolvent::new(bp, z)?.kernel(x, y))
}

fn check_point(x: f64) -> Result<(), TransformError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(TransformError::InvalidArgument(format!("position {x} is not in [0, ∞)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolventOptions {
    /// Requested spacing of the Nyström nodes on the potential support.
    pub node_spacing: f64,
    /// Largest dimension `n · nodes` of `I + Q`; the spacing is coarsened to respect it.
    pub max_unknowns: usize,
    /// Conditioning of `I + Q` above which the solve is refused.
    pub cond_max: f64,
    /// Estimated distance from `z` to a pole of `R(z)` below which the solve is refused.
    pub pole_distance: f64,
}

impl Default for ResolventOptions {
    fn default() -> Self {
        ResolventOptions { node_spacing: 0.01, max_unknowns: 2000, cond_max: 1e12, pole_distance: 2e-3 }
    }
}

/// The full resolvent `R(z) = R₀ − R₀ V₂ (I + Q)⁻¹ V₁ R₀` with `Q = V₁ R₀ V₂`, discretised by
/// midpoint Nyström quadrature on cells of the potential support.
///
/// Cell averages of `V` times the cell width are factored pointwise as `W = (Û√|W|)√|W|`.
#[derive(Debug, Clone)]
pub struct Resolvent {
    free: FreeResolvent,
    z: SpectralParameter,
    n: usize,
    nodes: Vec<f64>,
    spacing: f64,
    v1: Vec<CMat>,
    v2: Vec<CMat>,
    /// `(I + Q)⁻¹`.
    inverse: CMat,
    cond: f64,
    pole_distance: Option<f64>,
}

fn assemble_q(free: &FreeResolvent, nodes: &[f64], v1: &[CMat], v2: &[CMat], n: usize) -> CMat {
    let dim = nodes.len() * n;
    let rows: Vec<Vec<C64>> = (0..nodes.len())
        .into_par_iter()
        .map(|m| {
            let mut row = vec![ZERO; n * dim];
            for l in 0..nodes.len() {
                let blk = &v1[m] * free.kernel(nodes[m], nodes[l]) * &v2[l];
                for a in 0..n {
                    for b in 0..n {
                        row[a * dim + l * n + b] = blk[(a, b)];
                    }
                }
            }
            row
        })
        .collect();
    let mut q = CMat::identity(dim, dim);
    for (m, row) in rows.iter().enumerate() {
        for a in 0..n {
            for col in 0..dim {
                q[(m * n + a, col)] += row[a * dim + col];
            }
        }
    }
    q
}

fn one_norm(a: &CMat) -> f64 {
    a.column_iter().map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Smallest-modulus eigenvalue of `A` from a few steps of inverse iteration with `A⁻¹` given.
fn smallest_eigenvalue(inverse: &CMat, start: &CVec) -> (C64, CVec) {
    let mut v = start.normalize();
    let mut mu = ZERO;
    for _ in 0..30 {
        let w = inverse * &v;
        // Rayleigh quotient of A⁻¹
        let next = v.dotc(&w);
        let done = (next - mu).norm() <= 1e-10 * next.norm();
        mu = next;
        v = w.normalize();
        if done {
            break;
        }
    }
    (mu.inv(), v)
}

impl Resolvent {
    pub fn new(
        p: &PotentialSpec,
        bp: &BoundaryPair,
        z: SpectralParameter,
        opts: &ResolventOptions,
    ) -> Result<Self, TransformError> {
        check_channels(p, bp)?;
        if !(opts.node_spacing > 0.0) || opts.max_unknowns == 0 {
            return Err(TransformError::InvalidArgument("node spacing and size limit must be positive".into()));
        }
        let free = FreeResolvent::new(bp, z)?;
        let n = p.n();
        let support = p.support();
        let empty = Resolvent {
            free: free.clone(),
            z,
            n,
            nodes: Vec::new(),
            spacing: opts.node_spacing,
            v1: Vec::new(),
            v2: Vec::new(),
            inverse: CMat::zeros(0, 0),
            cond: 1.0,
            pole_distance: None,
        };
        if p.is_zero() || support == 0.0 {
            return Ok(empty);
        }
        let cells = ((support / opts.node_spacing).ceil() as usize).clamp(1, (opts.max_unknowns / n).max(1));
        let h = support / cells as f64;
        let nodes: Vec<f64> = (0..cells).map(|j| (j as f64 + 0.5) * h).collect();
        let (v1, v2): (Vec<CMat>, Vec<CMat>) =
            cell_averages(p, h, cells).iter().map(|avg| linalg::polar_sqrt(&(avg * c(h, 0.0)))).unzip();

        let a = assemble_q(&free, &nodes, &v1, &v2, n);
        let inverse = a.clone().lu().try_inverse().ok_or(TransformError::NearSingularQ {
            cond: f64::INFINITY,
            distance: Some(0.0),
        })?;
        let cond = one_norm(&a) * one_norm(&inverse);
        if !(cond <= opts.cond_max) {
            return Err(TransformError::NearSingularQ { cond, distance: None });
        }

        // an eigenvalue of I + Q(z) crosses zero linearly at a pole; its ratio to the slope
        // estimates the distance of z to that pole
        let dim = a.nrows();
        let start = CVec::from_fn(dim, |i, _| C64::from_polar(1.0, 0.7 * i as f64));
        let (lambda, vec) = smallest_eigenvalue(&inverse, &start);
        let mut pole_distance = None;
        if lambda.norm() < 0.1 {
            let e = z.energy();
            let dz = 1e-6 * e.norm().max(1.0);
            let shifted = match z {
                SpectralParameter::Off { re, im } => SpectralParameter::Off { re: re + dz, im },
                SpectralParameter::Above(l) => SpectralParameter::Above(l + dz),
                SpectralParameter::Below(l) => SpectralParameter::Below(l + dz),
            };
            let free2 = FreeResolvent::new(bp, shifted)?;
            let a2 = assemble_q(&free2, &nodes, &v1, &v2, n);
            if let Some(inv2) = a2.lu().try_inverse() {
                let (lambda2, _) = smallest_eigenvalue(&inv2, &vec);
                let slope = (lambda2 - lambda) / dz;
                let distance = lambda.norm() / slope.norm().max(f64::MIN_POSITIVE);
                pole_distance = Some(distance);
                if distance <= opts.pole_distance {
                    return Err(TransformError::NearSingularQ { cond, distance: Some(distance) });
                }
            }
        }
        Ok(Resolvent { nodes, spacing: h, v1, v2, inverse, cond, pole_distance, ..empty })
    }

    pub fn parameter(&self) -> SpectralParameter {
        self.z
    }

    /// Nyström node spacing actually used (after any coarsening).
    pub fn node_spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// One-norm condition number of `I + Q`.
    pub fn cond(&self) -> f64 {
        self.cond
    }

    /// Distance estimate to the nearest pole, when one is close enough to be estimated.
    pub fn pole_distance(&self) -> Option<f64> {
        self.pole_distance
    }

    /// `(I + Q)⁻¹ V₁ R₀(·, y)` stacked over the nodes.
    fn correction_factor(&self, y: f64) -> CMat {
        let n = self.n;
        let mut b = CMat::zeros(self.nodes.len() * n, n);
        for (l, yl) in self.nodes.iter().enumerate() {
            b.view_mut((l * n, 0), (n, n)).copy_from(&(&self.v1[l] * self.free.kernel(*yl, y)));
        }
        &self.inverse * b
    }

    fn apply_left(&self, x: f64, factor: &CMat) -> CMat {
        let n = self.n;
        let mut acc = CMat::zeros(n, n);
        for (m, ym) in self.nodes.iter().enumerate() {
            acc += self.free.kernel(x, *ym) * &self.v2[m] * factor.view((m * n, 0), (n, n));
        }
        acc
    }

    pub fn kernel(&self, x: f64, y: f64) -> CMat {
        let r0 = self.free.kernel(x, y);
        if self.nodes.is_empty() {
            return r0;
        }
        r0 - self.apply_left(x, &self.correction_factor(y))
    }

    /// `R(z)(x, y)` for all `x` in `xs` at fixed `y`.
    pub fn column(&self, y: f64, xs: &[f64]) -> Vec<CMat> {
        if self.nodes.is_empty() {
            return xs.iter().map(|x| self.free.kernel(*x, y)).collect();
        }
        let factor = self.correction_factor(y);
        xs.par_iter().map(|x| self.free.kernel(*x, y) - self.apply_left(*x, &factor)).collect()
    }
}

/// Resolvent kernel sampled on `grid × grid`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSample {
    pub z: SpectralParameter,
    pub grid: Vec<f64>,
    /// Row-major: entry `i · len + j` is `K(grid[i], grid[j])`.
    #[serde(skip)]
    pub values: Vec<CMat>,
    pub node_spacing: f64,
    pub cond: f64,
    pub pole_distance: Option<f64>,
}

impl KernelSample {
    pub fn at(&self, i: usize, j: usize) -> &CMat {
        &self.values[i * self.grid.len() + j]
    }

    /// `x,y,re_K_ab,im_K_ab,…` with one row per point pair.
    pub fn to_csv(&self) -> String {
        let n = self.values.first().map_or(0, |m| m.nrows());
        let mut out = String::from("x,y");
        for a in 0..n {
            for b in 0..n {
                let _ = write!(out, ",re_K_{a}{b},im_K_{a}{b}");
            }
        }
        out.push('\n');
        for (i, x) in self.grid.iter().enumerate() {
            for (j, y) in self.grid.iter().enumerate() {
                let _ = write!(out, "{},{}", crate::fmt_float(*x), crate::fmt_float(*y));
                let m = self.at(i, j);
                for a in 0..n {
                    for b in 0..n {
                        let _ = write!(out, ",{},{}", crate::fmt_float(m[(a, b)].re), crate::fmt_float(m[(a, b)].im));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

pub fn resolvent_kernel(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    z: SpectralParameter,
    grid: &[f64],
    opts: &ResolventOptions,
) -> Result<KernelSample, TransformError> {
    grid.iter().try_for_each(|x| check_point(*x))?;
    let r = Resolvent::new(p, bp, z, opts)?;
    let columns: Vec<Vec<CMat>> = grid.iter().map(|y| r.column(*y, grid)).collect();
    let len = grid.len();
    let values = (0..len * len).map(|idx| columns[idx % len][idx / len].clone()).collect();
    Ok(KernelSample {
        z,
        grid: grid.to_vec(),
        values,
        node_spacing: r.node_spacing(),
        cond: r.cond(),
        pole_distance: r.pole_distance(),
    })
}

/// Weak residual of `(H − z)K = δ` on the finite-difference oracle whose cells coincide with the
/// Nyström cells: `max_j ‖h [(H_h − z) K(·, x_c)]_j − δ_{jc} I‖` over cells `j` below `x_max − h`,
/// where `x_c` is the centre of cell `c` (1-based).
pub fn resolvent_residual(
    r: &Resolvent,
    p: &PotentialSpec,
    bp: &BoundaryPair,
    cell: usize,
    x_max: f64,
) -> Result<f64, TransformError> {
    let h = r.node_spacing();
    let dh = discrete_hamiltonian(p, bp, h, x_max)?;
    let centres = dh.grid();
    if cell == 0 || cell > centres.len() {
        return Err(TransformError::InvalidArgument(format!("cell {cell} is outside 1..={}", centres.len())));
    }
    let col = r.column(centres[cell - 1], &centres);
    let z = r.parameter().energy();
    let n = p.n();
    let mut worst: f64 = 0.0;
    for b in 0..n {
        let u: Vec<CVec> = col.iter().map(|m| m.column(b).into_owned()).collect();
        let hu = dh.apply(&u);
        for (j, (hv, v)) in hu.iter().zip(&u).enumerate().take(centres.len() - 1) {
            let mut res = (hv - v * z) * c(h, 0.0);
            if j + 1 == cell {
                res[b] -= 1.0;
            }
            worst = worst.max(res.norm());
        }
    }
    Ok(worst)
}

/// Nodes and weights of a quadrature rule on an interval of the half line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Trapezoid rule on `points` equispaced nodes including both ends.
    pub fn trapezoid(a: f64, b: f64, points: usize) -> Self {
        assert!(points >= 2 && b > a);
        let h = (b - a) / (points - 1) as f64;
        let nodes = (0..points).map(|i| a + h * i as f64).collect();
        let weights = (0..points).map(|i| if i == 0 || i + 1 == points { 0.5 * h } else { h }).collect();
        Quadrature { nodes, weights }
    }

    /// Composite Gauss–Legendre rule with `panels` equal panels of `order` points.
    pub fn gauss_legendre(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (nodes, weights) = crate::quad::composite(a, b, panels, order);
        Quadrature { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Vector-valued samples together with the quadrature used for integrals against them.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub quad: Quadrature,
    pub values: Vec<CVec>,
}

impl GridFunction {
    pub fn new(quad: Quadrature, values: Vec<CVec>) -> Result<Self, TransformError> {
        if quad.nodes.len() != values.len() || quad.weights.len() != values.len() || values.is_empty() {
            return Err(TransformError::InvalidArgument("nodes, weights and values must have equal non-zero length".into()));
        }
        if quad.nodes.windows(2).any(|w| w[1] <= w[0]) || quad.nodes[0] < 0.0 {
            return Err(TransformError::InvalidArgument("nodes must be increasing and non-negative".into()));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) {
            return Err(TransformError::InvalidArgument("all values must have the same length".into()));
        }
        Ok(GridFunction { quad, values })
    }

    pub fn from_fn(quad: Quadrature, f: impl Fn(f64) -> CVec) -> Result<Self, TransformError> {
        let values = quad.nodes.iter().map(|x| f(*x)).collect();
        GridFunction::new(quad, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.quad.nodes
    }

    pub fn n(&self) -> usize {
        self.values[0].len()
    }

    pub fn inner(&self, other: &GridFunction) -> C64 {
        self.quad.weights.iter().zip(self.values.iter().zip(&other.values)).map(|(w, (a, b))| a.dotc(b) * *w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    /// L² norm of the difference, sampled on a shared quadrature.
    pub fn distance(&self, other: &GridFunction) -> f64 {
        self.quad
            .weights
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * (a - b).norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// `t,re_0,im_0,…`, with `t` the node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for a in 0..self.n() {
            let _ = write!(out, ",re_{a},im_{a}");
        }
        out.push('\n');
        for (t, v) in self.grid().iter().zip(&self.values) {
            out.push_str(&crate::fmt_float(*t));
            for z in v.iter() {
                let _ = write!(out, ",{},{}", crate::fmt_float(z.re), crate::fmt_float(z.im));
            }
            out.push('\n');
        }
        out
    }
}

/// Which generalized Fourier map: `F⁺` uses `ψ(−k, x)`, `F⁻` uses `ψ(k, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Sign of the wavenumber at which the physical solution is taken.
    fn physical_sign(self) -> f64 {
        match self {
            Sign::Plus => -1.0,
            Sign::Minus => 1.0,
        }
    }
}

const NORM: f64 = std::f64::consts::FRAC_2_PI;

/// `√(2/π) ∫ cos(kx) ψ(x) dx` on the nodes of `k`.
pub fn cosine_transform(psi: &GridFunction, k: &Quadrature) -> GridFunction {
    let scale = NORM.sqrt();
    let values = k
        .nodes
        .par_iter()
        .map(|kk| {
            let mut acc = CVec::zeros(psi.n());
            for ((x, w), v) in psi.grid().iter().zip(&psi.quad.weights).zip(&psi.values) {
                acc += v * c(w * (kk * x).cos(), 0.0);
            }
            acc * c(scale, 0.0)
        })
        .collect();
    GridFunction { quad: k.clone(), values }
}

/// `(F±ψ)(k) = √(2/π) ∫ ψ±(k, x)† ψ(x) dx` on the nodes of `k`.
pub fn fourier_apply(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    sign: Sign,
    psi: &GridFunction,
    k: &Quadrature,
    opts: &OdeOptions,
) -> Result<GridFunction, TransformError> {
    check_channels(p, bp)?;
    check_dim(p, psi)?;
    let scale = NORM.sqrt();
    let values = k
        .nodes
        .par_iter()
        .map(|kk| {
            let wave = physical_parts(p, bp, *kk, psi.grid(), opts)?.psi(sign.physical_sign());
            let mut acc = CVec::zeros(psi.n());
            for ((m, w), v) in wave.values.iter().zip(&psi.quad.weights).zip(&psi.values) {
                acc += m.adjoint() * v * c(*w, 0.0);
            }
            Ok(acc * c(scale, 0.0))
        })
        .collect::<Result<Vec<_>, TransformError>>()?;
    Ok(GridFunction { quad: k.clone(), values })
}

/// `((F±)†φ)(x) = √(2/π) ∫ ψ±(k, x) φ(k) dk` on the nodes of `x`.
pub fn fourier_adjoint_apply(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    sign: Sign,
    phi: &GridFunction,
    x: &Quadrature,
    opts: &OdeOptions,
) -> Result<GridFunction, TransformError> {
    check_channels(p, bp)?;
    check_dim(p, phi)?;
    if x.nodes.windows(2).any(|w| w[1] <= w[0]) || x.nodes.first().is_some_and(|x0| *x0 < 0.0) {
        return Err(TransformError::InvalidArgument("position nodes must be increasing and non-negative".into()));
    }
    let n = phi.n();
    let zero = || vec![CVec::zeros(n); x.len()];
    let sum = phi
        .grid()
        .par_iter()
        .zip(&phi.quad.weights)
        .zip(&phi.values)
        .map(|((kk, w), v)| {
            let wave = physical_parts(p, bp, *kk, &x.nodes, opts)?.psi(sign.physical_sign());
            let weighted = v * c(*w, 0.0);
            Ok(wave.values.iter().map(|m| m * &weighted).collect::<Vec<CVec>>())
        })
        .try_fold(zero, |mut acc, term: Result<Vec<CVec>, TransformError>| {
            for (a, t) in acc.iter_mut().zip(term?) {
                *a += t;
            }
            Ok::<_, TransformError>(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            Ok(a)
        })?;
    let scale = c(NORM.sqrt(), 0.0);
    Ok(GridFunction { quad: x.clone(), values: sum.into_iter().map(|v| v * scale).collect() })
}

fn check_dim(p: &PotentialSpec, f: &GridFunction) -> Result<(), TransformError> {
    if f.n() != p.n() {
        return Err(TransformError::InvalidArgument(format!("function has {} components, potential {}", f.n(), p.n())));
    }
    Ok(())
}

/// `W± ψ = (F±)† F₀ ψ`, returned on the quadrature of `ψ`.
pub fn wave_operator_apply(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    sign: Sign,
    psi: &GridFunction,
    k: &Quadrature,
    opts: &OdeOptions,
) -> Result<GridFunction, TransformError> {
    let free = cosine_transform(psi, k);
    fourier_adjoint_apply(p, bp, sign, &free, &psi.quad, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringOperatorCheck {
    /// `‖F⁺(F⁻)†φ − Sφ‖` over the k-side quadrature.
    pub defect: f64,
    pub input_norm: f64,
}

/// Compares the scattering operator `F⁺(F⁻)†` with multiplication by `S(k)` on a k-side function.
pub fn scattering_operator_check(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    phi: &GridFunction,
    x: &Quadrature,
    opts: &OdeOptions,
) -> Result<ScatteringOperatorCheck, TransformError> {
    let g = fourier_adjoint_apply(p, bp, Sign::Minus, phi, x, opts)?;
    let back = fourier_apply(p, bp, Sign::Plus, &g, &phi.quad, opts)?;
    let expected = phi
        .grid()
        .par_iter()
        .zip(&phi.values)
        .map(|(k, v)| Ok(scattering_matrix(p, bp, *k, opts)?.s * v))
        .collect::<Result<Vec<CVec>, TransformError>>()?;
    let expected = GridFunction { quad: phi.quad.clone(), values: expected };
    Ok(ScatteringOperatorCheck { defect: back.distance(&expected), input_norm: phi.norm() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeflationOptions {
    /// Step and extent of the finite-difference oracle supplying bound-state eigenvectors.
    pub h: f64,
    pub x_max: f64,
}

impl Default for DeflationOptions {
    fn default() -> Self {
        DeflationOptions { h: 1e-3, x_max: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsevalReport {
    pub norm_sq: f64,
    pub transform_norm_sq: f64,
    /// `Σ_j |⟨ψ, φ_j⟩|²` over discrete bound-state eigenvectors.
    pub bound_projection_sq: f64,
    pub bound_states: usize,
    /// `|‖F±ψ‖² + Σ_j|⟨ψ, φ_j⟩|² − ‖ψ‖²| / ‖ψ‖²`.
    pub defect: f64,
}

/// Linear interpolation of cell-centred values at `x`, extrapolating at both ends.
fn interpolate(centres: &[f64], values: &[CVec], x: f64) -> CVec {
    let h = centres[1] - centres[0];
    let i = (((x - centres[0]) / h).floor().max(0.0) as usize).min(centres.len() - 2);
    let t = (x - centres[i]) / h;
    &values[i] * c(1.0 - t, 0.0) + &values[i + 1] * c(t, 0.0)
}

/// Projections of `ψ` onto normalised bound-state eigenvectors of the finite-difference oracle.
pub fn bound_state_projections(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    psi: &GridFunction,
    opts: &DeflationOptions,
) -> Result<Vec<C64>, TransformError> {
    let dh = discrete_hamiltonian(p, bp, opts.h, opts.x_max)?;
    let centres = dh.grid();
    let pairs = dh.eigenpairs_below(0.0, 1e-12);
    let mut out = Vec::new();
    for pair in &pairs {
        for v in &pair.vectors {
            let sampled: Vec<CVec> = psi.grid().iter().map(|x| interpolate(&centres, v, *x)).collect();
            let phi = GridFunction { quad: psi.quad.clone(), values: sampled };
            out.push(phi.inner(psi));
        }
    }
    Ok(out)
}

/// `‖F±ψ‖² + Σ_j |⟨ψ, φ_j⟩|² = ‖ψ‖²` with `F±ψ` integrated over `k`.
pub fn parseval_check(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    sign: Sign,
    psi: &GridFunction,
    k: &Quadrature,
    deflation: &DeflationOptions,
    opts: &OdeOptions,
) -> Result<ParsevalReport, TransformError> {
    let transformed = fourier_apply(p, bp, sign, psi, k, opts)?;
    let projections = bound_state_projections(p, bp, psi, deflation)?;
    let norm_sq = psi.norm().powi(2);
    let transform_norm_sq = transformed.norm().powi(2);
    let bound_projection_sq: f64 = projections.iter().map(|z| z.norm_sqr()).sum();
    Ok(ParsevalReport {
        norm_sq,
        transform_norm_sq,
        bound_projection_sq,
        bound_states: projections.len(),
        defect: (transform_norm_sq + bound_projection_sq - norm_sq).abs() / norm_sq.max(f64::MIN_POSITIVE),
    })
}
