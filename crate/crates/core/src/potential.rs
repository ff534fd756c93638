//! Hermitian matrix potentials with compact numerical support.
//!
//! Every model is normalised into a list of [`Segment`]s whose matrix-valued profile is constant,
//! linear or exponential. Beyond the last segment the potential is exactly zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, c, CMat, C64};
use crate::quad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("malformed potential: {0}")]
    Malformed(String),
    #[error("potential is not Hermitian (defect {0:e})")]
    NonHermitian(f64),
    #[error("potential is not integrable: {0}")]
    NotIntegrable(String),
}

impl PotentialError {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialError::Malformed(_) => "Malformed",
            PotentialError::NonHermitian(_) => "NonHermitian",
            PotentialError::NotIntegrable(_) => "NotIntegrable",
        }
    }
}

/// Analytic families. Parameters are positive magnitudes; wells are attractive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builtin {
    /// `V = −depth·I` on `[0, width]`.
    SquareWell {
        #[serde(default = "default_depth")]
        depth: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `V = e^{−rate·x}(−strength·I + coupling·(1 − δ_ij))`, truncated where the tail mass is negligible.
    ExpDecay {
        #[serde(default = "default_one")]
        strength: f64,
        #[serde(default = "default_one")]
        rate: f64,
        #[serde(default = "default_coupling")]
        coupling: f64,
    },
    /// `V = −diag(depths) + coupling·(1 − δ_ij)` on `[0, width]`; depths default to `linspace(2, 1, n)`.
    CoupledWell {
        #[serde(default)]
        depths: Option<Vec<f64>>,
        #[serde(default = "default_coupling")]
        coupling: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn default_depth() -> f64 {
    2.0
}
fn default_width() -> f64 {
    1.0
}
fn default_one() -> f64 {
    1.0
}
fn default_coupling() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialModel {
    /// `values[i]` holds on `(breakpoints[i-1], breakpoints[i])` with `breakpoints[-1] = 0`.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<CMat> },
    /// Linear interpolation between samples; zero outside `[grid[0], grid[last]]`.
    Sampled { grid: Vec<f64>, values: Vec<CMat> },
    Builtin(Builtin),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Profile {
    Constant(CMat),
    Linear(CMat, CMat),
    /// `w·e^{−rate·x}` in absolute coordinates.
    Exponential { w: CMat, rate: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Segment {
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    pub zero: bool,
}

impl Segment {
    pub fn eval(&self, x: f64) -> CMat {
        match &self.profile {
            Profile::Constant(v) => v.clone(),
            Profile::Linear(va, vb) => {
                let t = (x - self.a) / (self.b - self.a);
                va * c(1.0 - t, 0.0) + vb * c(t, 0.0)
            }
            Profile::Exponential { w, rate } => w * c((-rate * x).exp(), 0.0),
        }
    }

    /// Column-major `V(x)` into `out` (length n²).
    pub fn eval_into(&self, x: f64, out: &mut [C64]) {
        match &self.profile {
            Profile::Constant(v) => out.copy_from_slice(v.as_slice()),
            Profile::Linear(va, vb) => {
                let t = (x - self.a) / (self.b - self.a);
                for ((o, p), q) in out.iter_mut().zip(va.as_slice()).zip(vb.as_slice()) {
                    *o = p * (1.0 - t) + q * t;
                }
            }
            Profile::Exponential { w, rate } => {
                let e = (-rate * x).exp();
                for (o, p) in out.iter_mut().zip(w.as_slice()) {
                    *o = p * e;
                }
            }
        }
    }

    /// `∫_a^b e^{z y} V(y) dy` in closed form.
    fn exp_moment(&self, z: C64) -> CMat {
        let len = self.b - self.a;
        let ea = (z * self.a).exp();
        match &self.profile {
            Profile::Constant(v) => v * (ea * e1(z, len)),
            Profile::Linear(va, vb) => va * (ea * e1(z, len)) + (vb - va) * (ea * e2(z, len) / len),
            Profile::Exponential { w, rate } => {
                let zz = z - rate;
                w * ((zz * self.a).exp() * e1(zz, len))
            }
        }
    }

    fn sample_points(&self) -> Vec<CMat> {
        match &self.profile {
            Profile::Constant(v) => vec![v.clone()],
            Profile::Linear(va, vb) => vec![va.clone(), vb.clone()],
            Profile::Exponential { w, .. } => vec![w.clone()],
        }
    }

    /// `(∫‖V‖, ∫x‖V‖)` with the spectral norm.
    fn norm_moments(&self) -> (f64, f64) {
        let (a, b) = (self.a, self.b);
        match &self.profile {
            Profile::Constant(v) => {
                let nv = linalg::norm2(v);
                (nv * (b - a), nv * (b * b - a * a) / 2.0)
            }
            Profile::Exponential { w, rate } => {
                let nw = linalg::norm2(w);
                let r = *rate;
                let m0 = nw * ((-r * a).exp() - (-r * b).exp()) / r;
                let anti = |x: f64| -(-r * x).exp() * (x / r + 1.0 / (r * r));
                (m0, nw * (anti(b) - anti(a)))
            }
            Profile::Linear(..) => {
                let (xs, ws) = quad::composite(a, b, 4, 8);
                let mut m0 = 0.0;
                let mut m1 = 0.0;
                for (x, w) in xs.iter().zip(&ws) {
                    let nv = linalg::norm2(&self.eval(*x));
                    m0 += w * nv;
                    m1 += w * x * nv;
                }
                (m0, m1)
            }
        }
    }
}

/// `∫_0^L e^{z t} dt`.
fn e1(z: C64, len: f64) -> C64 {
    let w = z * len;
    if w.norm() < 0.5 {
        let mut term = c(1.0, 0.0);
        let mut sum = term;
        for j in 1..30 {
            term = term * w / (j as f64 + 1.0);
            sum += term;
        }
        sum * len
    } else {
        (w.exp() - 1.0) / z
    }
}

/// `∫_0^L t e^{z t} dt`.
fn e2(z: C64, len: f64) -> C64 {
    let w = z * len;
    if w.norm() < 0.5 {
        // Σ w^j / (j! (j+2))
        let mut fact = c(1.0, 0.0);
        let mut sum = c(0.5, 0.0);
        for j in 1..30 {
            fact = fact * w / j as f64;
            sum += fact / (j as f64 + 2.0);
        }
        sum * len * len
    } else {
        (w.exp() * (w - 1.0) + 1.0) / (z * z)
    }
}

/// A matrix potential on `(0, ∞)`, exactly zero beyond [`PotentialSpec::support`].
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    n: usize,
    model: PotentialModel,
    segments: Vec<Segment>,
    truncation_mass: f64,
}

pub const DEFAULT_TRUNCATION_MASS: f64 = 1e-12;

fn check_dim(n: usize, m: &CMat) -> Result<(), PotentialError> {
    if m.shape() != (n, n) {
        return Err(PotentialError::Malformed(format!("expected {n}x{n} matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if !linalg::is_finite(m) {
        return Err(PotentialError::Malformed("non-finite matrix entry".into()));
    }
    Ok(())
}

fn off_diagonal(n: usize, value: f64) -> CMat {
    CMat::from_fn(n, n, |i, j| if i == j { c(0.0, 0.0) } else { c(value, 0.0) })
}

impl PotentialSpec {
    pub fn new(n: usize, model: PotentialModel) -> Result<Self, PotentialError> {
        Self::with_truncation(n, model, DEFAULT_TRUNCATION_MASS)
    }

    pub fn with_truncation(n: usize, model: PotentialModel, truncation_mass: f64) -> Result<Self, PotentialError> {
        if n == 0 {
            return Err(PotentialError::Malformed("channel count must be positive".into()));
        }
        let segments = build_segments(n, &model, truncation_mass)?;
        Ok(PotentialSpec { n, model, segments, truncation_mass })
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, PotentialModel::PiecewiseConstant { breakpoints: vec![], values: vec![] }).unwrap()
    }

    pub fn square_well(n: usize, depth: f64, width: f64) -> Self {
        Self::new(n, PotentialModel::Builtin(Builtin::SquareWell { depth, width })).unwrap()
    }

    pub fn exp_decay(n: usize, strength: f64, rate: f64, coupling: f64) -> Result<Self, PotentialError> {
        Self::new(n, PotentialModel::Builtin(Builtin::ExpDecay { strength, rate, coupling }))
    }

    pub fn coupled_well(n: usize, depths: Option<Vec<f64>>, coupling: f64, width: f64) -> Result<Self, PotentialError> {
        Self::new(n, PotentialModel::Builtin(Builtin::CoupledWell { depths, coupling, width }))
    }

    /// Piecewise-constant potential from `(right end, matrix)` pieces starting at 0.
    pub fn piecewise(n: usize, pieces: Vec<(f64, CMat)>) -> Result<Self, PotentialError> {
        let (breakpoints, values) = pieces.into_iter().unzip();
        Self::new(n, PotentialModel::PiecewiseConstant { breakpoints, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub(crate) fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Right end of the numerical support (0 for the zero potential).
    pub fn support(&self) -> f64 {
        self.segments.last().map(|s| s.b).unwrap_or(0.0)
    }

    /// Segment end points, starting with 0 and ending at the support.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        for s in &self.segments {
            if s.a > *v.last().unwrap() {
                v.push(s.a);
            }
            v.push(s.b);
        }
        v
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(|s| s.zero)
    }

    /// `V(x)`; at a breakpoint the value of the segment to the right is returned.
    pub fn eval(&self, x: f64) -> CMat {
        for s in &self.segments {
            if x >= s.a && x < s.b {
                return s.eval(x);
            }
        }
        linalg::zeros(self.n)
    }

    /// `MVM†` for unitary `M`, preserving the model structure.
    pub fn conjugated(&self, m: &CMat) -> PotentialSpec {
        let conj = |v: &CMat| m * v * m.adjoint();
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                a: s.a,
                b: s.b,
                zero: s.zero,
                profile: match &s.profile {
                    Profile::Constant(v) => Profile::Constant(conj(v)),
                    Profile::Linear(p, q) => Profile::Linear(conj(p), conj(q)),
                    Profile::Exponential { w, rate } => Profile::Exponential { w: conj(w), rate: *rate },
                },
            })
            .collect();
        let model = match &self.model {
            PotentialModel::PiecewiseConstant { breakpoints, values } => PotentialModel::PiecewiseConstant {
                breakpoints: breakpoints.clone(),
                values: values.iter().map(conj).collect(),
            },
            PotentialModel::Sampled { grid, values } => {
                PotentialModel::Sampled { grid: grid.clone(), values: values.iter().map(conj).collect() }
            }
            PotentialModel::Builtin(_) => {
                // keep the exact segments; expose them as a sampled-free piecewise description
                PotentialModel::PiecewiseConstant { breakpoints: vec![], values: vec![] }
            }
        };
        PotentialSpec { n: self.n, model, segments, truncation_mass: self.truncation_mass }
    }

    /// `∫₀^∞ e^{zy} V(y) dy`.
    pub fn exp_moment(&self, z: C64) -> CMat {
        let mut acc = linalg::zeros(self.n);
        for s in &self.segments {
            if !s.zero {
                acc += s.exp_moment(z);
            }
        }
        acc
    }

    pub fn moments(&self) -> MomentData {
        MomentData { q1: self.exp_moment(c(0.0, 0.0)) * c(0.5, 0.0), potential: self.clone() }
    }

    /// Largest pointwise spectral norm (exact for all profiles: extremes sit at segment ends).
    pub fn sup_norm(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match &s.profile {
                Profile::Constant(v) => linalg::norm2(v),
                Profile::Linear(p, q) => linalg::norm2(p).max(linalg::norm2(q)),
                Profile::Exponential { w, rate } => linalg::norm2(w) * (-rate * s.a).exp(),
            })
            .fold(0.0, f64::max)
    }
}

fn build_segments(n: usize, model: &PotentialModel, mass: f64) -> Result<Vec<Segment>, PotentialError> {
    let seg = |a: f64, b: f64, profile: Profile| {
        let zero = match &profile {
            Profile::Constant(v) => v.iter().all(|z| *z == c(0.0, 0.0)),
            Profile::Linear(p, q) => p.iter().chain(q.iter()).all(|z| *z == c(0.0, 0.0)),
            Profile::Exponential { w, .. } => w.iter().all(|z| *z == c(0.0, 0.0)),
        };
        Segment { a, b, profile, zero }
    };
    let mut out = Vec::new();
    match model {
        PotentialModel::PiecewiseConstant { breakpoints, values } => {
            if breakpoints.len() != values.len() {
                return Err(PotentialError::Malformed("breakpoints and values differ in length".into()));
            }
            let mut prev = 0.0;
            for (b, v) in breakpoints.iter().zip(values) {
                if !(b.is_finite() && *b > prev) {
                    return Err(PotentialError::Malformed("breakpoints must be positive and increasing".into()));
                }
                check_dim(n, v)?;
                out.push(seg(prev, *b, Profile::Constant(v.clone())));
                prev = *b;
            }
        }
        PotentialModel::Sampled { grid, values } => {
            if grid.len() != values.len() || grid.len() < 2 {
                return Err(PotentialError::Malformed("sampled potential needs ≥ 2 matching samples".into()));
            }
            if !(grid[0].is_finite() && grid[0] >= 0.0) {
                return Err(PotentialError::Malformed("sample grid must start at a nonnegative point".into()));
            }
            for v in values {
                check_dim(n, v)?;
            }
            for i in 1..grid.len() {
                if !(grid[i].is_finite() && grid[i] > grid[i - 1]) {
                    return Err(PotentialError::Malformed("sample grid must be increasing".into()));
                }
                out.push(seg(grid[i - 1], grid[i], Profile::Linear(values[i - 1].clone(), values[i].clone())));
            }
        }
        PotentialModel::Builtin(b) => match b {
            Builtin::SquareWell { depth, width } => {
                if !(width.is_finite() && *width > 0.0 && depth.is_finite()) {
                    return Err(PotentialError::Malformed("square_well needs finite depth and width > 0".into()));
                }
                out.push(seg(0.0, *width, Profile::Constant(linalg::eye(n) * c(-depth, 0.0))));
            }
            Builtin::ExpDecay { strength, rate, coupling } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(PotentialError::NotIntegrable(format!("exp_decay rate {rate} must be positive")));
                }
                if !(strength.is_finite() && coupling.is_finite()) {
                    return Err(PotentialError::Malformed("exp_decay parameters must be finite".into()));
                }
                let w = linalg::eye(n) * c(-strength, 0.0) + off_diagonal(n, *coupling);
                let nw = linalg::norm2(&w);
                if nw > 0.0 {
                    // tail mass ‖W‖ e^{−rX}/r ≤ mass
                    let x_end = ((nw / (rate * mass)).ln() / rate).max(1.0 / rate);
                    out.push(seg(0.0, x_end, Profile::Exponential { w, rate: *rate }));
                }
            }
            Builtin::CoupledWell { depths, coupling, width } => {
                let d: Vec<f64> = match depths {
                    Some(d) => d.clone(),
                    None if n == 1 => vec![2.0],
                    None => (0..n).map(|i| 2.0 - i as f64 / (n - 1) as f64).collect(),
                };
                if d.len() != n {
                    return Err(PotentialError::Malformed(format!("coupled_well needs {n} depths")));
                }
                if !(width.is_finite() && *width > 0.0 && coupling.is_finite()) {
                    return Err(PotentialError::Malformed("coupled_well needs width > 0".into()));
                }
                let neg: Vec<f64> = d.iter().map(|x| -x).collect();
                let v = linalg::diag_re(&neg) + off_diagonal(n, *coupling);
                out.push(seg(0.0, *width, Profile::Constant(v)));
            }
        },
    }
    // drop trailing zero pieces so the support is tight
    while out.last().map(|s| s.zero).unwrap_or(false) {
        out.pop();
    }
    Ok(out)
}

/// `Q₁ = ½∫V` and `Q₂(k) = ½∫e^{2iky}V`.
#[derive(Debug, Clone)]
pub struct MomentData {
    pub q1: CMat,
    potential: PotentialSpec,
}

impl MomentData {
    pub fn q2(&self, k: C64) -> CMat {
        self.potential.exp_moment(c(0.0, 2.0) * k) * c(0.5, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialReport {
    pub hermiticity_defect: f64,
    pub l1_norm: f64,
    pub first_moment: f64,
}

/// Hermiticity defect, `∫‖V‖` and `∫x‖V‖`; fails when the defect exceeds `tol·max(1, sup‖V‖)`.
pub fn validate_potential(p: &PotentialSpec, tol: f64) -> Result<PotentialReport, PotentialError> {
    let mut defect: f64 = 0.0;
    let mut l1 = 0.0;
    let mut m1 = 0.0;
    for s in p.segments() {
        for v in s.sample_points() {
            defect = defect.max(linalg::hermiticity_defect(&v));
        }
    }
    if let PotentialModel::PiecewiseConstant { values, .. } | PotentialModel::Sampled { values, .. } = p.model() {
        for v in values {
            defect = defect.max(linalg::hermiticity_defect(v));
        }
    }
    if defect > tol * p.sup_norm().max(1.0) {
        return Err(PotentialError::NonHermitian(defect));
    }
    for s in p.segments() {
        if !s.zero {
            let (a, b) = s.norm_moments();
            l1 += a;
            m1 += b;
        }
    }
    Ok(PotentialReport { hermiticity_defect: defect, l1_norm: l1, first_moment: m1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_direct_branches_agree() {
        for &z in &[c(0.3, 0.1), c(0.0, 0.49), c(-0.2, 0.0)] {
            let len = 1.0;
            let direct1 = ((z * len).exp() - 1.0) / z;
            let direct2 = ((z * len).exp() * (z * len - 1.0) + 1.0) / (z * z);
            assert!((e1(z, len) - direct1).norm() < 1e-13);
            assert!((e2(z, len) - direct2).norm() < 1e-12);
        }
    }

    #[test]
    fn exp_decay_support_respects_tail_mass() {
        let p = PotentialSpec::exp_decay(1, 1.0, 1.0, 0.0).unwrap();
        let x = p.support();
        assert!((-x).exp() <= 1.0001e-12);
    }
}
