//! Bound states, the spectral shift function, Levinson's theorem and the trace formula.
//!
//! The spectral shift function is taken relative to the free Neumann operator `H₀` on all
//! channels: `ξ(E) = −#{E_j < E}` below zero and `ξ(E) = −Θ(√E)/(2π)` above, where `Θ` is the
//! continuous branch of `arg det S` anchored at `−π n_D` for large `k`.

mod bound;
mod discrete;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bound::{bound_states, default_kappa_max, BoundState, BoundStateOptions, KappaRange};
pub use discrete::{discrete_hamiltonian, DiscreteEigenpair, DiscreteHamiltonian, MAX_UNKNOWNS};
pub(crate) use discrete::cell_averages;

use crate::bc::{BcError, BoundaryPair};
use crate::linalg::{self, c, CMat, C64};
use crate::ode::OdeOptions;
use crate::potential::PotentialSpec;
use crate::quad;
use crate::scattering::{
    anchor_wavenumber, check_channels, high_energy_model, track_branch, BranchTrack, HighEnergyModel, ScatteringError,
};
use crate::solutions::SolutionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error("bound-state search did not converge near κ = {kappa}")]
    RootFindStall { kappa: f64 },
    #[error("discretisation would need {unknowns} unknowns")]
    OutOfMemory { unknowns: usize },
    #[error("small-k extrapolation is unstable: S varies by {spread:e} over the extrapolation points")]
    ExtrapolationUnstable { spread: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl SpectralError {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralError::Scattering(e) => e.name(),
            SpectralError::RootFindStall { .. } => "RootFindStall",
            SpectralError::OutOfMemory { .. } => "OutOfMemory",
            SpectralError::ExtrapolationUnstable { .. } => "ExtrapolationUnstable",
            SpectralError::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

impl From<BcError> for SpectralError {
    fn from(e: BcError) -> Self {
        SpectralError::Scattering(e.into())
    }
}

impl From<SolutionError> for SpectralError {
    fn from(e: SolutionError) -> Self {
        SpectralError::Scattering(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsfSample {
    pub energy: f64,
    pub xi: f64,
    /// `|det S(√E) − e^{−2πiξ}|` for `E > 0`.
    pub birman_krein_residual: Option<f64>,
}

/// Logarithmic grid from `lo` to `hi` with `per_decade` points per decade (both ends included).
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = (((hi / lo).log10() * per_decade as f64).ceil() as usize).max(1);
    (0..=steps).map(|i| lo * (hi / lo).powf(i as f64 / steps as f64)).collect()
}

/// Branch of `arg det S` on `ks` plus an anchoring grid up to a safe large wavenumber.
fn anchored_branch(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    ks: &[f64],
    opts: &OdeOptions,
) -> Result<BranchTrack, SpectralError> {
    let n_d = bp.normal_form()?.n_dirichlet;
    let k_lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
    let k_hi = ks.iter().copied().fold(0.0, f64::max);
    let anchor = anchor_wavenumber(p, bp)?.max(2.0 * k_hi);
    let mut all = log_grid(k_lo.min(anchor), anchor, 40);
    all.extend_from_slice(ks);
    Ok(track_branch(p, bp, &all, n_d, opts)?)
}

/// `ξ(E)` on a grid of nonzero energies.
pub fn ssf(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    energies: &[f64],
    opts: &BoundStateOptions,
) -> Result<Vec<SsfSample>, SpectralError> {
    check_channels(p, bp)?;
    if let Some(e) = energies.iter().find(|e| **e == 0.0 || !e.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("energy {e} is excluded; ξ is evaluated off E = 0")));
    }
    let neg_min = energies.iter().filter(|e| **e < 0.0).map(|e| (-e).sqrt()).fold(f64::INFINITY, f64::min);
    let bound = if neg_min.is_finite() {
        let max = default_kappa_max(p, bp)?;
        if neg_min < max {
            bound_states(p, bp, KappaRange { min: neg_min * (1.0 - 1e-9), max }, opts)?
        } else {
            Vec::new()
        }
    } else {
        Vec::new()
    };
    let ks: Vec<f64> = energies.iter().filter(|e| **e > 0.0).map(|e| e.sqrt()).collect();
    let track = if ks.is_empty() { None } else { Some(anchored_branch(p, bp, &ks, &opts.ode)?) };
    energies
        .iter()
        .map(|&e| {
            if e < 0.0 {
                let below: usize = bound.iter().filter(|b| b.energy < e).map(|b| b.multiplicity).sum();
                return Ok(SsfSample { energy: e, xi: -(below as f64), birman_krein_residual: None });
            }
            let track = track.as_ref().expect("positive energies were tracked");
            let k = e.sqrt();
            let i = track.samples.iter().position(|s| s.k == k).expect("sampled k");
            let theta = track.theta[i];
            let xi = -theta / (2.0 * PI);
            let det = linalg::det(&track.samples[i].s);
            let bk = (det - C64::from_polar(1.0, -2.0 * PI * xi)).norm();
            Ok(SsfSample { energy: e, xi, birman_krein_residual: Some(bk) })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevinsonOptions {
    /// Three decreasing wavenumbers for quadratic extrapolation to `k = 0`.
    pub ks: [f64; 3],
    /// Distance from +1 below which an eigenvalue of `S(0)` counts towards μ.
    pub eig_tol: f64,
    /// Largest allowed `‖S(k₁) − S(k₃)‖` over the extrapolation points.
    pub extrap_tol: f64,
    pub kappa_min: f64,
    #[serde(skip)]
    pub bound: BoundStateOptions,
}

impl Default for LevinsonOptions {
    fn default() -> Self {
        LevinsonOptions {
            ks: [1e-2, 5e-3, 2.5e-3],
            eig_tol: 1e-3,
            extrap_tol: 0.05,
            kappa_min: 1e-4,
            bound: BoundStateOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevinsonReport {
    pub xi0_plus: f64,
    pub n: usize,
    pub mu: usize,
    #[serde(rename = "N")]
    pub bound_count: usize,
    /// `½(n − μ) − N`.
    pub predicted: f64,
    pub defect: f64,
    /// Eigenvalues of the extrapolated `S(0)` as `[re, im]`.
    pub s0_eigenvalues: Vec<[f64; 2]>,
}

/// Lagrange weights for quadratic extrapolation to 0 through three samples.
fn zero_extrapolation_weights(ks: &[f64; 3]) -> [f64; 3] {
    let weight = |i: usize| -> f64 { (0..3).filter(|&j| j != i).map(|j| -ks[j] / (ks[i] - ks[j])).product() };
    [weight(0), weight(1), weight(2)]
}

/// Compares `ξ(0+)` with `½(n − μ) − N`.
pub fn levinson_check(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    opts: &LevinsonOptions,
) -> Result<LevinsonReport, SpectralError> {
    check_channels(p, bp)?;
    let ks = opts.ks;
    if !(ks[0] > ks[1] && ks[1] > ks[2] && ks[2] > 0.0) {
        return Err(SpectralError::InvalidArgument("extrapolation wavenumbers must decrease and stay positive".into()));
    }
    let track = anchored_branch(p, bp, &ks, &opts.bound.ode)?;
    let at = |k: f64| track.samples.iter().position(|s| s.k == k).expect("sampled k");
    let idx = [at(ks[0]), at(ks[1]), at(ks[2])];
    let s: [CMat; 3] = idx.map(|i| track.samples[i].s.clone());
    let spread = (&s[0] - &s[2]).norm();
    if spread > opts.extrap_tol {
        return Err(SpectralError::ExtrapolationUnstable { spread });
    }
    let w = zero_extrapolation_weights(&ks);
    let theta0: f64 = (0..3).map(|i| w[i] * track.theta[idx[i]]).sum();
    let s0 = (0..3).fold(linalg::zeros(bp.n()), |acc, i| acc + &s[i] * c(w[i], 0.0));
    let eig = linalg::eigenvalues(&s0);
    let mu = eig.iter().filter(|z| (*z - 1.0).norm() < opts.eig_tol).count();
    let max = default_kappa_max(p, bp)?;
    let bound = bound_states(p, bp, KappaRange { min: opts.kappa_min, max }, &opts.bound)?;
    let bound_count: usize = bound.iter().map(|b| b.multiplicity).sum();
    let n = bp.n();
    // adding 0.0 turns −0 into +0 so reports print cleanly
    let xi0_plus = -theta0 / (2.0 * PI) + 0.0;
    let predicted = 0.5 * (n as f64 - mu as f64) - bound_count as f64;
    Ok(LevinsonReport {
        xi0_plus,
        n,
        mu,
        bound_count,
        predicted,
        defect: (xi0_plus - predicted).abs(),
        s0_eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
    })
}

/// A test function `f` for the trace formula, with `f'(E) = O(E^{−1−ε})`.
pub trait TraceFunction: Sync {
    fn value(&self, e: f64) -> f64;
    fn derivative(&self, e: f64) -> f64;
    /// Energies at or below this value are outside the domain of `f`.
    fn singular_below(&self) -> f64 {
        f64::NEG_INFINITY
    }
}

/// `f(E) = (E + c)⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventFunction {
    pub shift: f64,
}

impl TraceFunction for ResolventFunction {
    fn value(&self, e: f64) -> f64 {
        1.0 / (e + self.shift)
    }

    fn derivative(&self, e: f64) -> f64 {
        -1.0 / (e + self.shift).powi(2)
    }

    fn singular_below(&self) -> f64 {
        -self.shift
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceOptions {
    pub h: f64,
    pub x_max: f64,
    /// Discrete eigenvalues are summed up to here; the rest is an analytic tail.
    pub e_cut: f64,
    /// Absolute accuracy of discrete eigenvalues.
    pub eig_tol: f64,
    #[serde(skip)]
    pub bound: BoundStateOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { h: 1e-3, x_max: 200.0, e_cut: 50.0, eig_tol: 1e-9, bound: BoundStateOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|rhs|, 1e-12)`.
    pub defect: f64,
    /// `∫_{E<0} ξ f'`, the bound-state steps.
    pub rhs_bound: f64,
    /// `∫_0^{E_max} ξ f'` by quadrature.
    pub rhs_continuous: f64,
    /// `∫_{E_max}^∞ ξ f'` from the high-energy model.
    pub rhs_tail: f64,
    /// The same high-energy tail from `e_cut`, used on the discrete side.
    pub lhs_tail: f64,
    pub discrete_count: usize,
    pub reference_count: usize,
}

/// `∫_{e0}^∞ ξ f' dE` with `ξ` from the `O(1/k)` high-energy model of `S`.
fn high_energy_tail(model: &HighEnergyModel, n_d: usize, f: &dyn TraceFunction, e0: f64) -> f64 {
    // E = e0 / t maps the half line onto (0, 1]
    let (ts, ws) = quad::composite(0.0, 1.0, 4, 16);
    ts.iter()
        .zip(&ws)
        .map(|(t, w)| {
            let e = e0 / t;
            let det = linalg::det(&(model.s_inf.adjoint() * model.predict(e.sqrt())));
            let xi = 0.5 * n_d as f64 - det.arg() / (2.0 * PI);
            w * xi * f.derivative(e) * e0 / (t * t)
        })
        .sum()
}

/// `Tr(f(H) − f(H₀))` from discrete spectra against `∫ ξ f' dE`.
///
/// The left side sums discrete eigenvalues below `e_cut` and adds `f(e_cut)(N₀ − N)(e_cut)`,
/// which keeps the truncation continuous in `e_cut`. Above `e_cut` the oscillating discrete
/// counting difference is replaced by its mean, the high-energy `ξ`.
pub fn trace_formula_check(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    f: &dyn TraceFunction,
    opts: &TraceOptions,
) -> Result<TraceReport, SpectralError> {
    check_channels(p, bp)?;
    let n = bp.n();
    let n_d = bp.normal_form()?.n_dirichlet;

    let kmax = default_kappa_max(p, bp)?;
    let bound = bound_states(p, bp, KappaRange { min: 1e-4, max: kmax }, &opts.bound)?;
    if let Some(b) = bound.iter().find(|b| b.energy <= f.singular_below()) {
        return Err(SpectralError::InvalidArgument(format!(
            "test function is singular at or above the eigenvalue {}",
            b.energy
        )));
    }
    let rhs_bound: f64 = bound.iter().map(|b| -(b.multiplicity as f64) * (f.value(0.0) - f.value(b.energy))).sum();

    // ∫_0^K ξ(k²) f'(k²) 2k dk on graded Gauss panels
    let k_end = anchor_wavenumber(p, bp)?;
    let mut breaks = vec![0.0, 0.05];
    while *breaks.last().unwrap() < k_end {
        let next = (breaks.last().unwrap() * 1.5).min(k_end);
        breaks.push(next);
    }
    let (ks, ws) = quad::composite_breaks(&breaks, f64::INFINITY, 12);
    let track = anchored_branch(p, bp, &ks, &opts.bound.ode)?;
    let mut rhs_continuous = 0.0;
    for (k, w) in ks.iter().zip(&ws) {
        let theta = track.theta_at(*k).expect("sampled k");
        rhs_continuous += w * (-theta / (2.0 * PI)) * f.derivative(k * k) * 2.0 * k;
    }
    let model = high_energy_model(p, bp)?;
    let rhs_tail = high_energy_tail(&model, n_d, f, k_end * k_end);
    let rhs = rhs_bound + rhs_continuous + rhs_tail;

    let dh = discrete_hamiltonian(p, bp, opts.h, opts.x_max)?;
    let d0 = discrete_hamiltonian(&PotentialSpec::zero(n), &BoundaryPair::neumann(n), opts.h, opts.x_max)?;
    let ev = dh.eigenvalues_below(opts.e_cut, opts.eig_tol);
    let ev0 = d0.eigenvalues_below(opts.e_cut, opts.eig_tol);
    let sum: f64 = ev.iter().map(|e| f.value(*e)).sum::<f64>() - ev0.iter().map(|e| f.value(*e)).sum::<f64>();
    let fc = f.value(opts.e_cut);
    let lhs_tail = high_energy_tail(&model, n_d, f, opts.e_cut);
    let lhs = sum + fc * (ev0.len() as f64 - ev.len() as f64) + lhs_tail;

    Ok(TraceReport {
        lhs,
        rhs,
        defect: (lhs - rhs).abs() / rhs.abs().max(1e-12),
        rhs_bound,
        rhs_continuous,
        rhs_tail,
        lhs_tail,
        discrete_count: ev.len(),
        reference_count: ev0.len(),
    })
}
