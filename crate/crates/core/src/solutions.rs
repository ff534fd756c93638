//! Matrix solutions of `−ψ'' + Vψ = k²ψ`: Jost, second, regular and physical solutions.

use serde::Serialize;
use thiserror::Error;

use crate::bc::BoundaryPair;
use crate::linalg::{self, c, CMat, C64, I, ONE, ZERO};
use crate::ode::{Dop853, OdeError, OdeOptions};
use crate::potential::PotentialSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolutionError {
    #[error("integration diverged: {0}")]
    SolveDiverged(#[from] OdeError),
    #[error("k = 0 is excluded; use small-k limits")]
    ZeroK,
    #[error("grids differ or index out of range")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("Jost matrix is numerically singular (cond = {0:e})")]
    SingularJost(f64),
}

impl SolutionError {
    pub fn name(&self) -> &'static str {
        match self {
            SolutionError::SolveDiverged(_) => "SolveDiverged",
            SolutionError::ZeroK => "ZeroK",
            SolutionError::GridMismatch => "GridMismatch",
            SolutionError::InvalidGrid(_) => "InvalidGrid",
            SolutionError::SingularJost(_) => "SingularJost",
        }
    }
}

/// Matrix solution values and derivatives on a grid at fixed `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveSolutionSample {
    pub k: C64,
    pub grid: Vec<f64>,
    pub values: Vec<CMat>,
    pub derivs: Vec<CMat>,
}

impl WaveSolutionSample {
    pub fn n(&self) -> usize {
        self.values.first().map(|v| v.nrows()).unwrap_or(0)
    }

    /// CSV with columns `x`, then `Re/Im` of each entry of `ψ` and `ψ'` (row-major).
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut s = String::from("x");
        for name in ["psi", "dpsi"] {
            for i in 0..n {
                for j in 0..n {
                    s.push_str(&format!(",re_{name}_{i}{j},im_{name}_{i}{j}"));
                }
            }
        }
        s.push('\n');
        for (idx, x) in self.grid.iter().enumerate() {
            s.push_str(&crate::fmt_float(*x));
            for m in [&self.values[idx], &self.derivs[idx]] {
                for i in 0..n {
                    for j in 0..n {
                        s.push(',');
                        s.push_str(&crate::fmt_float(m[(i, j)].re));
                        s.push(',');
                        s.push_str(&crate::fmt_float(m[(i, j)].im));
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Whether the left factor of a Wronskian is taken as its adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convention {
    Plain,
    AdjointLeft,
}

/// `[F; G] = F G' − F' G` at grid index `i`, with `F ↦ F†` under [`Convention::AdjointLeft`].
pub fn wronskian(
    f: &WaveSolutionSample,
    g: &WaveSolutionSample,
    i: usize,
    conv: Convention,
) -> Result<CMat, SolutionError> {
    if f.grid != g.grid || i >= f.grid.len() || f.n() != g.n() {
        return Err(SolutionError::GridMismatch);
    }
    let (fv, fd) = match conv {
        Convention::Plain => (f.values[i].clone(), f.derivs[i].clone()),
        Convention::AdjointLeft => (f.values[i].adjoint(), f.derivs[i].adjoint()),
    };
    Ok(fv * &g.derivs[i] - fd * &g.values[i])
}

fn check_grid(grid: &[f64]) -> Result<(), SolutionError> {
    for (i, x) in grid.iter().enumerate() {
        if !x.is_finite() || *x < 0.0 {
            return Err(SolutionError::InvalidGrid(format!("point {x} outside [0, ∞)")));
        }
        if i > 0 && *x <= grid[i - 1] {
            return Err(SolutionError::InvalidGrid("grid must be strictly increasing".into()));
        }
    }
    Ok(())
}

/// `sin(kΔ)/k`, continuous at `k = 0`.
fn sinc_len(k: C64, d: f64) -> C64 {
    let w = k * d;
    if w.norm() < 1e-4 {
        c(d, 0.0) * (ONE - w * w / 6.0 + w * w * w * w / 120.0)
    } else {
        w.sin() / k
    }
}

/// Exact propagation over a force-free stretch of length `d` (either sign).
fn free_step(k: C64, d: f64, y: &CMat, dy: &CMat) -> (CMat, CMat) {
    let co = (k * d).cos();
    let si = sinc_len(k, d);
    let ks = -(k * k) * si;
    (y * co + dy * si, y * ks + dy * co)
}

/// Propagates a matrix solution from `(x0, y0, dy0)` to each target, in order.
///
/// Targets must be monotone and on one side of `x0`. The potential must vanish beyond its support
/// only in the sense that the caller handles the exterior; this routine treats any stretch outside
/// every segment as force-free.
pub(crate) fn propagate(
    p: &PotentialSpec,
    k: C64,
    x0: f64,
    y0: &CMat,
    dy0: &CMat,
    targets: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<(CMat, CMat)>, OdeError> {
    let n = p.n();
    let nn = n * n;
    let k2 = k * k;
    let mut out = Vec::with_capacity(targets.len());
    if targets.is_empty() {
        return Ok(out);
    }
    let forward = targets.last().copied().unwrap_or(x0) >= x0;
    let mut stops: Vec<f64> = Vec::new();
    let bps = p.breakpoints();
    let (lo, hi) = if forward { (x0, *targets.last().unwrap()) } else { (*targets.last().unwrap(), x0) };
    for b in &bps {
        if *b > lo && *b < hi {
            stops.push(*b);
        }
    }
    let mut marks: Vec<(f64, Option<usize>)> = stops.into_iter().map(|b| (b, None)).collect();
    marks.extend(targets.iter().enumerate().map(|(i, t)| (*t, Some(i))));
    if forward {
        marks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.is_some().cmp(&b.1.is_some())));
    } else {
        marks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.is_some().cmp(&b.1.is_some())));
    }

    let mut state: Vec<C64> = Vec::with_capacity(2 * nn);
    state.extend_from_slice(y0.as_slice());
    state.extend_from_slice(dy0.as_slice());
    let mut x = x0;
    let mut stepper = Dop853::new(x0, state.clone(), *opts);
    let mut stepper_live = false;
    let mut vbuf = vec![ZERO; nn];
    let segs = p.segments();
    let mut results: Vec<Option<(CMat, CMat)>> = vec![None; targets.len()];

    for (xt, idx) in marks {
        if xt != x {
            let mid = 0.5 * (x + xt);
            let seg = segs.iter().find(|s| mid > s.a && mid < s.b && !s.zero);
            match seg {
                None => {
                    let y = CMat::from_column_slice(n, n, &state[..nn]);
                    let dy = CMat::from_column_slice(n, n, &state[nn..]);
                    let (y1, dy1) = free_step(k, xt - x, &y, &dy);
                    state[..nn].copy_from_slice(y1.as_slice());
                    state[nn..].copy_from_slice(dy1.as_slice());
                    stepper_live = false;
                }
                Some(seg) => {
                    if !stepper_live {
                        stepper.reset(x, &state);
                        stepper_live = true;
                    }
                    let mut rhs = |xx: f64, y: &[C64], dy: &mut [C64]| {
                        seg.eval_into(xx, &mut vbuf);
                        dy[..nn].copy_from_slice(&y[nn..]);
                        for j in 0..n {
                            for i in 0..n {
                                let mut acc = -k2 * y[i + n * j];
                                for l in 0..n {
                                    acc += vbuf[i + n * l] * y[l + n * j];
                                }
                                dy[nn + i + n * j] = acc;
                            }
                        }
                    };
                    stepper.integrate_to(&mut rhs, xt)?;
                    state.copy_from_slice(stepper.y());
                }
            }
            x = xt;
            // the right-hand side changes across a breakpoint
            if idx.is_none() {
                stepper_live = false;
            }
        }
        if let Some(i) = idx {
            results[i] = Some((
                CMat::from_column_slice(n, n, &state[..nn]),
                CMat::from_column_slice(n, n, &state[nn..]),
            ));
        }
    }
    for r in results {
        out.push(r.expect("every target visited"));
    }
    Ok(out)
}

/// Solution with asymptotics `e^{σikx}I` (σ = ±1) beyond the support, on an arbitrary grid.
fn asymptotic_solution(
    p: &PotentialSpec,
    k: C64,
    sigma: f64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WaveSolutionSample, SolutionError> {
    if k == ZERO {
        return Err(SolutionError::ZeroK);
    }
    check_grid(grid)?;
    let n = p.n();
    let s = p.support();
    let ik = I * k * sigma;
    let mut values = vec![CMat::zeros(n, n); grid.len()];
    let mut derivs = vec![CMat::zeros(n, n); grid.len()];
    let mut inner: Vec<usize> = Vec::new();
    for (i, x) in grid.iter().enumerate() {
        if *x >= s {
            let e = (ik * *x).exp();
            values[i] = linalg::eye(n) * e;
            derivs[i] = linalg::eye(n) * (ik * e);
        } else {
            inner.push(i);
        }
    }
    if !inner.is_empty() {
        inner.reverse();
        let targets: Vec<f64> = inner.iter().map(|&i| grid[i]).collect();
        let e = (ik * s).exp();
        let sol = propagate(p, k, s, &(linalg::eye(n) * e), &(linalg::eye(n) * (ik * e)), &targets, opts)?;
        for (&i, (y, dy)) in inner.iter().zip(sol) {
            values[i] = y;
            derivs[i] = dy;
        }
    }
    Ok(WaveSolutionSample { k, grid: grid.to_vec(), values, derivs })
}

/// Jost solution `f(k, x) = e^{ikx}I` beyond the support, integrated backward inside it.
pub fn jost_solution(
    p: &PotentialSpec,
    k: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WaveSolutionSample, SolutionError> {
    asymptotic_solution(p, k, 1.0, grid, opts)
}

/// Second solution `g(k, x) = e^{−ikx}I` beyond the support.
pub fn second_solution(
    p: &PotentialSpec,
    k: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WaveSolutionSample, SolutionError> {
    asymptotic_solution(p, k, -1.0, grid, opts)
}

/// Regular solution with `φ(k,0) = A`, `φ'(k,0) = B`; `k = 0` is allowed.
pub fn regular_solution(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WaveSolutionSample, SolutionError> {
    check_grid(grid)?;
    let n = p.n();
    if bp.n() != n {
        return Err(SolutionError::InvalidGrid(format!("boundary pair has {} channels, potential {n}", bp.n())));
    }
    let s = p.support();
    let mut targets: Vec<f64> = grid.iter().copied().filter(|x| *x <= s).collect();
    let need_edge = grid.iter().any(|x| *x > s);
    if need_edge && targets.last().copied() != Some(s) {
        targets.push(s);
    }
    let sol = propagate(p, k, 0.0, bp.a(), bp.b(), &targets, opts)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut derivs = Vec::with_capacity(grid.len());
    let mut it = sol.iter();
    let mut edge: Option<(CMat, CMat)> = None;
    for x in grid {
        if *x <= s {
            let (y, dy) = it.next().unwrap();
            values.push(y.clone());
            derivs.push(dy.clone());
        } else {
            if edge.is_none() {
                edge = Some(sol.last().unwrap().clone());
            }
            let (ys, dys) = edge.as_ref().unwrap();
            let (y, dy) = exterior(k, s, ys, dys, *x);
            values.push(y);
            derivs.push(dy);
        }
    }
    Ok(WaveSolutionSample { k, grid: grid.to_vec(), values, derivs })
}

/// Continues free data given at `s` to `x > s` via the `e^{±ikx}` decomposition.
fn exterior(k: C64, s: f64, y: &CMat, dy: &CMat, x: f64) -> (CMat, CMat) {
    if k.norm() < 1e-12 {
        return (y + dy * c(x - s, 0.0), dy.clone());
    }
    let ik = I * k;
    let alpha = (y * ik + dy) * ((-ik * s).exp() / (ik * 2.0));
    let beta = (y * ik - dy) * ((ik * s).exp() / (ik * 2.0));
    let ep = (ik * x).exp();
    let em = (-ik * x).exp();
    (&alpha * ep + &beta * em, &alpha * (ik * ep) - &beta * (ik * em))
}

/// `f(−k*, 0)† B − f'(−k*, 0)† A` from Jost data at the origin.
pub(crate) fn jost_from_origin(f0: &CMat, df0: &CMat, bp: &BoundaryPair) -> CMat {
    f0.adjoint() * bp.b() - df0.adjoint() * bp.a()
}

/// Physical solution together with the defect of the cross-check against `−ikφJ⁻¹`.
#[derive(Debug, Clone)]
pub struct PhysicalSolution {
    pub sample: WaveSolutionSample,
    pub s: CMat,
    pub cross_check_defect: f64,
}

/// Jost data needed to assemble physical solutions at a real `k`.
pub(crate) struct PhysicalParts {
    /// `f(k, ·)` and `f(−k, ·)` on the caller's grid.
    pub f_plus: WaveSolutionSample,
    pub f_minus: WaveSolutionSample,
    pub j_plus: CMat,
    pub s: CMat,
}

pub(crate) fn physical_parts(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: f64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<PhysicalParts, SolutionError> {
    if k == 0.0 {
        return Err(SolutionError::ZeroK);
    }
    let has_zero = grid.first() == Some(&0.0);
    let mut aug = Vec::with_capacity(grid.len() + 1);
    if !has_zero {
        aug.push(0.0);
    }
    aug.extend_from_slice(grid);
    let mut fp = jost_solution(p, c(k, 0.0), &aug, opts)?;
    let mut fm = jost_solution(p, c(-k, 0.0), &aug, opts)?;
    // J(k) uses f(−k*) = f(−k); J(−k) uses f(k)
    let j_plus = jost_from_origin(&fm.values[0], &fm.derivs[0], bp);
    let j_minus = jost_from_origin(&fp.values[0], &fp.derivs[0], bp);
    let cond = linalg::cond(&j_plus);
    if !(cond < 1e12) {
        return Err(SolutionError::SingularJost(cond));
    }
    let s = -linalg::solve_right(&j_minus, &j_plus).ok_or(SolutionError::SingularJost(f64::INFINITY))?;
    if !has_zero {
        for w in [&mut fp, &mut fm] {
            w.grid.remove(0);
            w.values.remove(0);
            w.derivs.remove(0);
        }
    }
    Ok(PhysicalParts { f_plus: fp, f_minus: fm, j_plus, s })
}

impl PhysicalParts {
    /// `ψ(k,·) = ½f(−k) + ½f(k)S(k)` (`sign = +1`) or `ψ(−k,·) = ½f(k) + ½f(−k)S(k)†` (`sign = −1`).
    pub fn psi(&self, sign: f64) -> WaveSolutionSample {
        let half = c(0.5, 0.0);
        let (a, b, s) = if sign > 0.0 {
            (&self.f_minus, &self.f_plus, self.s.clone())
        } else {
            (&self.f_plus, &self.f_minus, self.s.adjoint())
        };
        let values = a.values.iter().zip(&b.values).map(|(x, y)| (x + y * &s) * half).collect();
        let derivs = a.derivs.iter().zip(&b.derivs).map(|(x, y)| (x + y * &s) * half).collect();
        WaveSolutionSample { k: c(sign * self.f_plus.k.re, 0.0), grid: a.grid.clone(), values, derivs }
    }
}

/// `ψ(k, x) = ½f(−k,x) + ½f(k,x)S(k)` for real `k ≠ 0`, cross-checked against `−ikφ(k,x)J(k)⁻¹`.
pub fn physical_solution(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    k: f64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<PhysicalSolution, SolutionError> {
    let parts = physical_parts(p, bp, k, grid, opts)?;
    let sample = parts.psi(1.0);
    let phi = regular_solution(p, bp, c(k, 0.0), grid, opts)?;
    let jinv = linalg::inverse(&parts.j_plus).ok_or(SolutionError::SingularJost(f64::INFINITY))?;
    let factor = -I * k;
    let mut defect: f64 = 0.0;
    for (psi, ph) in sample.values.iter().zip(&phi.values) {
        let alt = ph * &jinv * factor;
        defect = defect.max((psi - alt).norm() / psi.norm().max(1.0));
    }
    Ok(PhysicalSolution { sample, s: parts.s, cross_check_defect: defect })
}
