//! Jost and scattering matrices, zero-potential closed forms and the high-energy model.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bc::{BcError, BoundaryPair, ChannelKind, NormalForm};
use crate::linalg::{self, c, CMat, C64, I, ONE};
use crate::ode::OdeOptions;
use crate::potential::{validate_potential, MomentData, PotentialSpec};
use crate::quad;
use crate::solutions::{self, jost_solution, regular_solution, SolutionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error("Jost matrix is numerically singular at k = {k} (cond = {cond:e})")]
    SingularJost { k: f64, cond: f64 },
    #[error("phase of det S jumps by {jump} between k = {k0} and k = {k1}")]
    BranchJump { k0: f64, k1: f64, jump: f64 },
    #[error("channel count mismatch: potential {0}, boundary condition {1}")]
    ChannelMismatch(usize, usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ScatteringError {
    pub fn name(&self) -> &'static str {
        match self {
            ScatteringError::Solution(e) => e.name(),
            ScatteringError::Bc(e) => e.name(),
            ScatteringError::SingularJost { .. } => "SingularJost",
            ScatteringError::BranchJump { .. } => "BranchJump",
            ScatteringError::ChannelMismatch(..) => "ChannelMismatch",
            ScatteringError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub(crate) fn check_channels(p: &PotentialSpec, bp: &BoundaryPair) -> Result<(), ScatteringError> {
    if p.n() != bp.n() {
        return Err(ScatteringError::ChannelMismatch(p.n(), bp.n()));
    }
    Ok(())
}

/// `J(k) = f(−k*, 0)† B − f'(−k*, 0)† A`.
pub fn jost_matrix(p: &PotentialSpec, bp: &BoundaryPair, k: C64, opts: &OdeOptions) -> Result<CMat, ScatteringError> {
    check_channels(p, bp)?;
    let f = jost_solution(p, -k.conj(), &[0.0], opts)?;
    Ok(solutions::jost_from_origin(&f.values[0], &f.derivs[0], bp))
}

/// `J(k)` as the Wronskian `[f(−k*,x)†; φ(k,x)]` at every grid point.
pub fn jost_matrix_wronskian(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<CMat>, ScatteringError> {
    check_channels(p, bp)?;
    let f = jost_solution(p, -k.conj(), grid, opts)?;
    let phi = regular_solution(p, bp, k, grid, opts)?;
    (0..grid.len())
        .map(|i| solutions::wronskian(&f, &phi, i, solutions::Convention::AdjointLeft).map_err(Into::into))
        .collect()
}

/// Gauss–Legendre nodes covering the support, resolving oscillations at wavenumber `k`.
pub(crate) fn support_nodes(p: &PotentialSpec, k: f64) -> (Vec<f64>, Vec<f64>) {
    let panel = (1.0 / (1.0 + k.abs())).min(0.25);
    quad::composite_breaks(&p.breakpoints(), panel, 16)
}

/// `J(k) = J₀(k) + ∫ e^{ikx} V(x) φ(k,x) dx`, with φ from the ODE at the quadrature nodes.
pub fn jost_matrix_integral(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: C64,
    opts: &OdeOptions,
) -> Result<CMat, ScatteringError> {
    check_channels(p, bp)?;
    let mut j = bp.b() - bp.a() * (I * k);
    let (xs, ws) = support_nodes(p, k.norm());
    if xs.is_empty() {
        return Ok(j);
    }
    let phi = regular_solution(p, bp, k, &xs, opts)?;
    for ((x, w), ph) in xs.iter().zip(&ws).zip(&phi.values) {
        j += p.eval(*x) * ph * ((I * k * *x).exp() * *w);
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixSample {
    pub k: f64,
    pub s: CMat,
    pub unitarity_defect: f64,
}

/// `S(k) = −J(−k) J(k)⁻¹` for real `k > 0`, via a linear solve.
pub fn scattering_matrix(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: f64,
    opts: &OdeOptions,
) -> Result<SMatrixSample, ScatteringError> {
    check_channels(p, bp)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(ScatteringError::InvalidArgument(format!("scattering matrix needs real k > 0, got {k}")));
    }
    let f = jost_solution(p, c(k, 0.0), &[0.0], opts)?;
    let fm = jost_solution(p, c(-k, 0.0), &[0.0], opts)?;
    let j_minus = solutions::jost_from_origin(&f.values[0], &f.derivs[0], bp);
    let j_plus = solutions::jost_from_origin(&fm.values[0], &fm.derivs[0], bp);
    let cond = linalg::cond(&j_plus);
    if !(cond < 1e12) {
        return Err(ScatteringError::SingularJost { k, cond });
    }
    let s = -linalg::solve_right(&j_minus, &j_plus).ok_or(ScatteringError::SingularJost { k, cond })?;
    let unitarity_defect = (&s * s.adjoint() - linalg::eye(s.nrows())).norm();
    Ok(SMatrixSample { k, s, unitarity_defect })
}

/// Scattering matrices on a grid of positive `k`, computed in parallel and returned in input order.
pub fn scattering_matrices(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    ks: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<SMatrixSample>, ScatteringError> {
    ks.par_iter().map(|&k| scattering_matrix(p, bp, k, opts)).collect()
}

/// Closed forms for `V = 0` through the diagonal normal form; no ODE is solved.
#[derive(Debug, Clone)]
pub struct FreeClosedForms {
    pub k: C64,
    pub normal_form: NormalForm,
    /// `J₀(k) = B − ikA`.
    pub j0: CMat,
    pub j0_inv: CMat,
    pub s0: CMat,
    t1_inv: CMat,
}

/// Diagonal entry of `J̃₀(k)` for channel `j`.
pub fn j0_tilde(nf: &NormalForm, j: usize, k: C64) -> C64 {
    match nf.kind(j) {
        ChannelKind::Dirichlet => c(-1.0, 0.0),
        ChannelKind::Neumann => I * k,
        ChannelKind::Mixed => {
            let th = nf.thetas[j];
            c(th.cos(), 0.0) + I * k * th.sin()
        }
    }
}

/// Diagonal entry of `φ̃₀(k, x)` for channel `j`.
pub fn phi0_tilde(nf: &NormalForm, j: usize, k: C64, x: f64) -> C64 {
    let kx = k * x;
    let sinc = if kx.norm() < 1e-6 { c(x, 0.0) * (ONE - kx * kx / 6.0) } else { kx.sin() / k };
    match nf.kind(j) {
        ChannelKind::Dirichlet => -sinc,
        ChannelKind::Neumann => -kx.cos(),
        ChannelKind::Mixed => {
            let th = nf.thetas[j];
            sinc * th.cos() - kx.cos() * th.sin()
        }
    }
}

impl FreeClosedForms {
    pub fn n(&self) -> usize {
        self.j0.nrows()
    }

    /// `φ₀(k, x) = M φ̃₀ M† T₁`.
    pub fn phi0(&self, x: f64) -> CMat {
        let nf = &self.normal_form;
        let d: Vec<C64> = (0..self.n()).map(|j| phi0_tilde(nf, j, self.k, x)).collect();
        &nf.m * linalg::diag(&d) * nf.m.adjoint() * &nf.t1
    }

    /// `φ₀(k, x) J₀(k)⁻¹ = M φ̃₀ J̃₀⁻¹ M†`, independent of the representative `(A, B)`.
    pub fn phi0_j0_inv(&self, x: f64) -> CMat {
        let nf = &self.normal_form;
        let d: Vec<C64> =
            (0..self.n()).map(|j| phi0_tilde(nf, j, self.k, x) / j0_tilde(nf, j, self.k)).collect();
        &nf.m * linalg::diag(&d) * nf.m.adjoint()
    }

    /// `ψ₀(σk, x) = −iσk φ₀(σk,x) J₀(σk)⁻¹`; `ψ₀^±(k,x) = ψ₀(∓k,x)` corresponds to `sigma = ∓1`.
    pub fn psi0(&self, sigma: f64, x: f64) -> CMat {
        let nf = &self.normal_form;
        let k = self.k * sigma;
        let d: Vec<C64> = (0..self.n())
            .map(|j| -I * k * phi0_tilde(nf, j, k, x) / j0_tilde(nf, j, k))
            .collect();
        &nf.m * linalg::diag(&d) * nf.m.adjoint()
    }

    /// `ψ₀^±(k, x) = ψ₀(∓k, x)`.
    pub fn psi0_pm(&self, plus: bool, x: f64) -> CMat {
        self.psi0(if plus { -1.0 } else { 1.0 }, x)
    }

    /// `T₁⁻¹`, mapping normal-form quantities back to the given representative.
    pub fn t1_inv(&self) -> &CMat {
        &self.t1_inv
    }
}

pub fn free_closed_forms(bp: &BoundaryPair, k: C64) -> Result<FreeClosedForms, BcError> {
    let nf = bp.normal_form()?;
    let n = bp.n();
    let t1_inv = linalg::inverse(&nf.t1).ok_or(BcError::SingularT(f64::INFINITY))?;
    let jt: Vec<C64> = (0..n).map(|j| j0_tilde(&nf, j, k)).collect();
    let jt_inv: Vec<C64> = jt.iter().map(|z| ONE / z).collect();
    let s_t: Vec<C64> = (0..n).map(|j| -j0_tilde(&nf, j, -k) / jt[j]).collect();
    let j0 = bp.b() - bp.a() * (I * k);
    let j0_inv = &t1_inv * &nf.m * linalg::diag(&jt_inv) * nf.m.adjoint();
    let s0 = &nf.m * linalg::diag(&s_t) * nf.m.adjoint();
    Ok(FreeClosedForms { k, normal_form: nf, j0, j0_inv, s0, t1_inv })
}

/// `S(k) ≈ S∞ + G(k)/(ik)` at large `k`.
#[derive(Debug, Clone)]
pub struct HighEnergyModel {
    pub s_inf: CMat,
    /// `M Z₁ M†`.
    pub mz1m: CMat,
    pub q1: CMat,
    moments: MomentData,
}

impl HighEnergyModel {
    pub fn g(&self, k: f64) -> CMat {
        let s = &self.s_inf;
        let q2p = self.moments.q2(c(k, 0.0));
        let q2m = self.moments.q2(c(-k, 0.0));
        &self.mz1m * c(-2.0, 0.0) + &self.q1 * s + s * &self.q1 + s * q2p * s + q2m
    }

    pub fn predict(&self, k: f64) -> CMat {
        &self.s_inf + self.g(k) / (I * k)
    }
}

pub fn high_energy_model(p: &PotentialSpec, bp: &BoundaryPair) -> Result<HighEnergyModel, ScatteringError> {
    check_channels(p, bp)?;
    let nf = bp.normal_form()?;
    let moments = p.moments();
    Ok(HighEnergyModel { s_inf: nf.s_inf(), mz1m: &nf.m * nf.z1() * nf.m.adjoint(), q1: moments.q1.clone(), moments })
}

/// Largest phase increment accepted between neighbouring samples.
pub const MAX_PHASE_STEP: f64 = PI / 2.0;

/// Continuous branch of `arg det S(k)` on sorted samples, anchored near `−π n_D` at the largest `k`.
pub fn det_arg_branch(samples: &[SMatrixSample], n_d: usize) -> Result<Vec<f64>, ScatteringError> {
    let args: Vec<f64> = samples.iter().map(|s| linalg::det(&s.s).arg()).collect();
    let mut theta = Vec::with_capacity(args.len());
    for (i, a) in args.iter().enumerate() {
        if i == 0 {
            theta.push(*a);
            continue;
        }
        if samples[i].k <= samples[i - 1].k {
            return Err(ScatteringError::InvalidArgument("samples must be sorted by increasing k".into()));
        }
        let inc = linalg::wrap_pi(a - args[i - 1]);
        if inc.abs() >= MAX_PHASE_STEP {
            return Err(ScatteringError::BranchJump { k0: samples[i - 1].k, k1: samples[i].k, jump: inc });
        }
        theta.push(theta[i - 1] + inc);
    }
    if let Some(last) = theta.last().copied() {
        let target = -PI * n_d as f64;
        let j = ((target - last) / (2.0 * PI)).round();
        for t in theta.iter_mut() {
            *t += 2.0 * PI * j;
        }
    }
    Ok(theta)
}

/// Branch of `arg det S` with adaptive midpoint insertion where the phase moves too fast.
#[derive(Debug, Clone)]
pub struct BranchTrack {
    /// All samples, including inserted refinement points, sorted by `k`.
    pub samples: Vec<SMatrixSample>,
    pub theta: Vec<f64>,
}

impl BranchTrack {
    /// Branch value at a sampled `k` (exact match).
    pub fn theta_at(&self, k: f64) -> Option<f64> {
        self.samples.iter().position(|s| s.k == k).map(|i| self.theta[i])
    }
}

pub const MAX_REFINE_DEPTH: usize = 20;

pub fn track_branch(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    ks: &[f64],
    n_d: usize,
    opts: &OdeOptions,
) -> Result<BranchTrack, ScatteringError> {
    let mut ks: Vec<f64> = ks.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ks.dedup();
    let base = scattering_matrices(p, bp, &ks, opts)?;
    let mut out: Vec<SMatrixSample> = Vec::with_capacity(base.len());
    for s in base {
        if let Some(prev) = out.last().cloned() {
            refine(p, bp, &prev, &s, 0, opts, &mut out)?;
        }
        out.push(s);
    }
    let theta = det_arg_branch(&out, n_d)?;
    Ok(BranchTrack { samples: out, theta })
}

fn refine(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    a: &SMatrixSample,
    b: &SMatrixSample,
    depth: usize,
    opts: &OdeOptions,
    out: &mut Vec<SMatrixSample>,
) -> Result<(), ScatteringError> {
    let inc = linalg::wrap_pi(linalg::det(&b.s).arg() - linalg::det(&a.s).arg());
    if inc.abs() < MAX_PHASE_STEP {
        return Ok(());
    }
    if depth >= MAX_REFINE_DEPTH {
        return Err(ScatteringError::BranchJump { k0: a.k, k1: b.k, jump: inc });
    }
    let mid = scattering_matrix(p, bp, 0.5 * (a.k + b.k), opts)?;
    refine(p, bp, a, &mid, depth + 1, opts, out)?;
    out.push(mid.clone());
    refine(p, bp, &mid, b, depth + 1, opts, out)
}

/// A wavenumber beyond which `S(k)` stays close to `S∞`, so the anchored branch is reliable.
pub fn anchor_wavenumber(p: &PotentialSpec, bp: &BoundaryPair) -> Result<f64, ScatteringError> {
    let nf = bp.normal_form()?;
    let cot_max = (0..nf.n())
        .filter(|&j| nf.kind(j) == ChannelKind::Mixed)
        .map(|j| (1.0 / nf.thetas[j].tan()).abs())
        .fold(0.0, f64::max);
    let l1 = validate_potential(p, f64::INFINITY).map(|r| r.l1_norm).unwrap_or(0.0);
    Ok(20.0 * (2.0 * cot_max + 2.0 * l1 + 1.0))
}

/// `‖S(k) − S₀(k) + (2i/k) ∫ ψ₀(k,x) V(x) ψ(k,x) dx‖` with `ψ = −ikφJ⁻¹`.
pub fn born_identity_defect(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: f64,
    opts: &OdeOptions,
) -> Result<f64, ScatteringError> {
    let s = scattering_matrix(p, bp, k, opts)?.s;
    let free = free_closed_forms(bp, c(k, 0.0))?;
    let mut acc = CMat::zeros(bp.n(), bp.n());
    let (xs, ws) = support_nodes(p, k);
    if !xs.is_empty() {
        let j = jost_matrix(p, bp, c(k, 0.0), opts)?;
        let jinv = linalg::inverse(&j).ok_or(ScatteringError::SingularJost { k, cond: f64::INFINITY })?;
        let phi = regular_solution(p, bp, c(k, 0.0), &xs, opts)?;
        for ((x, w), ph) in xs.iter().zip(&ws).zip(&phi.values) {
            let psi = ph * &jinv * (-I * k);
            acc += free.psi0(1.0, *x) * p.eval(*x) * psi * c(*w, 0.0);
        }
    }
    Ok((s - &free.s0 + acc * (c(0.0, 2.0) / k)).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> SlopeFit {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    SlopeFit { slope, intercept: my - slope * mx }
}
