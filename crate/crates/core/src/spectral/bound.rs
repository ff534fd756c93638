//! Bound states as crossings of Cayley eigenphases along the positive imaginary `k` axis.
//!
//! The Jost data `[f(iκ,0); f'(iκ,0)]` and the boundary data `[A; B]` both span Lagrangian planes.
//! Their Cayley images `(Y + iX)(Y − iX)⁻¹` are unitary, and the planes intersect exactly where
//! `U_bc† U_f(κ)` has the eigenvalue 1. The eigenphases move monotonically clockwise as κ
//! decreases, so bound states are counted by the winding of `det(U_bc† U_f)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bc::{BoundaryPair, ChannelKind};
use crate::linalg::{self, c, CMat, I};
use crate::ode::OdeOptions;
use crate::potential::PotentialSpec;
use crate::scattering::check_channels;
use crate::solutions::{jost_from_origin, propagate};

use super::SpectralError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaRange {
    pub min: f64,
    pub max: f64,
}

impl KappaRange {
    /// `[1e-3, κ_max]` with κ_max from [`default_kappa_max`].
    pub fn default_for(p: &PotentialSpec, bp: &BoundaryPair) -> Result<Self, SpectralError> {
        Ok(KappaRange { min: 1e-3, max: default_kappa_max(p, bp)? })
    }
}

/// Upper bound `√(c² + sup‖V‖) + 1` on `κ` for any bound state, with `c = max(0, max cot θ)`.
pub fn default_kappa_max(p: &PotentialSpec, bp: &BoundaryPair) -> Result<f64, SpectralError> {
    let nf = bp.normal_form()?;
    let cot = (0..nf.n())
        .filter(|&j| nf.kind(j) == ChannelKind::Mixed)
        .map(|j| 1.0 / nf.thetas[j].tan())
        .fold(0.0, f64::max);
    Ok((cot * cot + p.sup_norm()).sqrt() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundStateOptions {
    /// Base scan density on the logarithmic κ grid.
    pub points_per_decade: usize,
    /// Relative width at which bisection stops.
    pub root_tol: f64,
    #[serde(skip)]
    pub ode: OdeOptions,
}

impl Default for BoundStateOptions {
    fn default() -> Self {
        BoundStateOptions { points_per_decade: 40, root_tol: 1e-12, ode: OdeOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundState {
    pub energy: f64,
    pub kappa: f64,
    pub multiplicity: usize,
    /// Orthonormal columns spanning the right null space of `J(iκ)`.
    #[serde(skip)]
    pub vectors: CMat,
    /// `m`-th smallest singular value of `J(iκ)`, relative to `‖[f; f']‖ ‖[A; B]‖`.
    pub null_ratio: f64,
}

/// Phase-step size that triggers midpoint insertion.
const MAX_INCREMENT: f64 = PI / 4.0;
const MAX_DEPTH: usize = 40;
const MAX_BISECTIONS: usize = 200;

/// `(f(iκ,0), f'(iκ,0))` up to a positive scale, renormalised along the way to avoid overflow.
fn jost_plane(p: &PotentialSpec, kappa: f64, opts: &OdeOptions) -> Result<(CMat, CMat), SpectralError> {
    let n = p.n();
    let k = c(0.0, kappa);
    let mut y = linalg::eye(n);
    let mut dy = linalg::eye(n) * (I * k);
    let mut x = p.support();
    // each chunk grows the solution by at most e^{30}
    let chunk = 30.0 / kappa.max(1e-300);
    while x > 0.0 {
        let next = (x - chunk).max(0.0);
        let sol = propagate(p, k, x, &y, &dy, &[next], opts).map_err(crate::solutions::SolutionError::from)?;
        let (ny, ndy) = sol.into_iter().next().expect("one target");
        let scale = ny.norm().max(ndy.norm());
        y = ny / c(scale, 0.0);
        dy = ndy / c(scale, 0.0);
        x = next;
    }
    Ok((y, dy))
}

#[derive(Debug, Clone, Copy)]
struct PhasePoint {
    kappa: f64,
    /// Sum of principal eigenphases in `(−2π, 0]` (up to rounding).
    sum: f64,
    /// Continuous branch of `arg det`.
    omega: f64,
}

impl PhasePoint {
    fn wraps(&self) -> i64 {
        ((self.sum - self.omega) / (2.0 * PI)).round() as i64
    }
}

struct Tracker<'a> {
    p: &'a PotentialSpec,
    u_bc_adj: CMat,
    opts: OdeOptions,
}

impl Tracker<'_> {
    fn phase_sum(&self, kappa: f64) -> Result<f64, SpectralError> {
        let (f, df) = jost_plane(self.p, kappa, &self.opts)?;
        let plus = &df + &f * I;
        let minus = &df - &f * I;
        let u_f = linalg::solve_right(&plus, &minus).ok_or(SpectralError::RootFindStall { kappa })?;
        let w = &self.u_bc_adj * u_f;
        Ok(linalg::eigenvalues(&w)
            .iter()
            .map(|z| {
                let a = z.arg();
                if a > 1e-13 {
                    a - 2.0 * PI
                } else {
                    a
                }
            })
            .sum())
    }

    fn start(&self, kappa: f64) -> Result<PhasePoint, SpectralError> {
        let sum = self.phase_sum(kappa)?;
        Ok(PhasePoint { kappa, sum, omega: sum })
    }

    /// Continues the branch from `from` to `to`, inserting midpoints where the phase moves fast.
    fn walk(&self, from: &PhasePoint, to: f64, depth: usize) -> Result<PhasePoint, SpectralError> {
        let sum = self.phase_sum(to)?;
        let inc = linalg::wrap_pi(sum - from.sum);
        if inc.abs() <= MAX_INCREMENT {
            return Ok(PhasePoint { kappa: to, sum, omega: from.omega + inc });
        }
        if depth >= MAX_DEPTH {
            return Err(SpectralError::RootFindStall { kappa: to });
        }
        let mid = self.walk(from, 0.5 * (from.kappa + to), depth + 1)?;
        self.walk(&mid, to, depth + 1)
    }

    /// Bisects `(lo, hi)` down to roots, given the branch at both ends (`hi.kappa > lo.kappa`).
    fn isolate(
        &self,
        hi: PhasePoint,
        lo: PhasePoint,
        tol: f64,
        budget: &mut usize,
        out: &mut Vec<(f64, usize)>,
    ) -> Result<(), SpectralError> {
        let count = lo.wraps() - hi.wraps();
        if count <= 0 {
            return Ok(());
        }
        if hi.kappa - lo.kappa <= tol * hi.kappa {
            out.push((0.5 * (hi.kappa + lo.kappa), count as usize));
            return Ok(());
        }
        if *budget == 0 {
            return Err(SpectralError::RootFindStall { kappa: 0.5 * (hi.kappa + lo.kappa) });
        }
        *budget -= 1;
        let mid = self.walk(&hi, 0.5 * (hi.kappa + lo.kappa), 0)?;
        let lo2 = self.walk(&mid, lo.kappa, 0)?;
        self.isolate(hi, mid, tol, budget, out)?;
        self.isolate(mid, lo2, tol, budget, out)
    }
}

/// All bound states with `κ` in `(range.min, range.max)`, sorted by energy.
///
/// For potentials that are merely integrable, eigenvalues may accumulate at 0; only the ones
/// above `range.min` are reported.
pub fn bound_states(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    range: KappaRange,
    opts: &BoundStateOptions,
) -> Result<Vec<BoundState>, SpectralError> {
    check_channels(p, bp)?;
    if !(range.min > 0.0 && range.max > range.min && range.max.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!(
            "κ range needs 0 < min < max, got [{}, {}]",
            range.min, range.max
        )));
    }
    let u_bc = linalg::solve_right(&(bp.b() + bp.a() * I), &(bp.b() - bp.a() * I))
        .ok_or_else(|| SpectralError::InvalidArgument("B − iA is singular".into()))?;
    let tracker = Tracker { p, u_bc_adj: u_bc.adjoint(), opts: opts.ode };

    let ratio = 10f64.powf(-1.0 / opts.points_per_decade.max(1) as f64);
    let max_step = 0.5 / (1.0 + p.support());
    let mut grid = vec![range.max];
    while let Some(&k) = grid.last() {
        if k <= range.min {
            break;
        }
        grid.push((k * ratio).max(k - max_step).max(range.min));
    }

    let mut roots = Vec::new();
    let mut prev = tracker.start(range.max)?;
    let mut budget = MAX_BISECTIONS * p.n() * 4;
    for &k in &grid[1..] {
        let next = tracker.walk(&prev, k, 0)?;
        tracker.isolate(prev, next, opts.root_tol, &mut budget, &mut roots)?;
        prev = next;
    }

    let mut out: Vec<BoundState> = roots
        .into_iter()
        .map(|(kappa, m)| {
            let (f, df) = jost_plane(p, kappa, &opts.ode)?;
            let j = jost_from_origin(&f, &df, bp);
            let m = m.min(p.n());
            let (vectors, sv) = linalg::null_space(&j, m);
            let scale = (f.norm_squared() + df.norm_squared()).sqrt()
                * (bp.a().norm_squared() + bp.b().norm_squared()).sqrt();
            Ok(BoundState {
                energy: -kappa * kappa,
                kappa,
                multiplicity: m,
                vectors,
                null_ratio: sv[m - 1] / scale.max(f64::MIN_POSITIVE),
            })
        })
        .collect::<Result<_, SpectralError>>()?;
    out.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(out)
}
