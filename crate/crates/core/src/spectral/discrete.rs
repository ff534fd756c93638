//! Cell-centred finite-difference discretisation of the Hamiltonian, used as an independent oracle.

use crate::bc::{BoundaryPair, ChannelKind};
use crate::linalg::{self, c, CMat, CVec, C64, ZERO};
use crate::potential::PotentialSpec;
use crate::quad;

use super::SpectralError;

/// Largest number of scalar unknowns a discretisation may allocate.
pub const MAX_UNKNOWNS: usize = 10_000_000;

/// Block-tridiagonal Hermitian matrix on cells `((j−1)h, jh)`, `j = 1..N`, with centres `(j−½)h`.
///
/// Off-diagonal blocks are `−I/h²`. The vertex condition enters through a ghost value
/// `φ₀ = Gφ₁` in the first block and the far end carries a Dirichlet wall.
#[derive(Debug, Clone)]
pub struct DiscreteHamiltonian {
    n: usize,
    h: f64,
    blocks: Vec<CMat>,
    /// Real diagonal for the scalar case, where the Sturm count runs in plain `f64`.
    scalar: Option<Vec<f64>>,
}

/// A discrete eigenvalue with an orthonormal basis of its eigenvectors.
#[derive(Debug, Clone)]
pub struct DiscreteEigenpair {
    pub energy: f64,
    /// One entry per eigenvector, each a list of cell values normalised to `h Σ|φ_j|² = 1`.
    pub vectors: Vec<Vec<CVec>>,
}

/// Ghost-cell factors `g` in the normal-form basis: `φ₀ = M diag(g) M† φ₁`.
fn ghost_factors(bp: &BoundaryPair, h: f64) -> Result<(CMat, Vec<f64>), SpectralError> {
    let nf = bp.normal_form()?;
    let mut g = Vec::with_capacity(nf.n());
    for j in 0..nf.n() {
        g.push(match nf.kind(j) {
            ChannelKind::Dirichlet => -1.0,
            ChannelKind::Neumann => 1.0,
            ChannelKind::Mixed => {
                let hc = h / nf.thetas[j].tan();
                if hc >= 2.0 {
                    return Err(SpectralError::InvalidArgument(format!(
                        "step h = {h} too coarse for vertex coupling cot θ = {}",
                        hc / h
                    )));
                }
                (2.0 + hc) / (2.0 - hc)
            }
        });
    }
    Ok((nf.m, g))
}

/// Cell averages of `V` with a 4-point Gauss rule on each piece of the cell.
pub(crate) fn cell_averages(p: &PotentialSpec, h: f64, cells: usize) -> Vec<CMat> {
    let (gx, gw) = quad::gauss_legendre(4);
    let n = p.n();
    let support = p.support();
    let bps = p.breakpoints();
    let mut out = Vec::with_capacity(cells);
    for j in 0..cells {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        if a >= support {
            out.push(linalg::zeros(n));
            continue;
        }
        let mut cuts = vec![a];
        cuts.extend(bps.iter().copied().filter(|x| *x > a && *x < b));
        cuts.push(b);
        let mut acc = linalg::zeros(n);
        for w in cuts.windows(2) {
            let half = 0.5 * (w[1] - w[0]);
            for (x, wt) in gx.iter().zip(&gw) {
                acc += p.eval(w[0] + half * (x + 1.0)) * c(half * wt, 0.0);
            }
        }
        out.push(acc / c(h, 0.0));
    }
    out
}

/// Assembles the finite-difference Hamiltonian on `[0, x_max]` with step `h`.
pub fn discrete_hamiltonian(
    p: &PotentialSpec,
    bp: &BoundaryPair,
    h: f64,
    x_max: f64,
) -> Result<DiscreteHamiltonian, SpectralError> {
    let n = p.n();
    if bp.n() != n {
        return Err(SpectralError::InvalidArgument(format!("potential has {n} channels, boundary pair {}", bp.n())));
    }
    if !(h > 0.0 && x_max > h && h.is_finite() && x_max.is_finite()) {
        return Err(SpectralError::InvalidArgument(format!("need 0 < h < x_max, got h = {h}, x_max = {x_max}")));
    }
    if x_max < p.support() {
        return Err(SpectralError::InvalidArgument(format!(
            "x_max = {x_max} lies inside the potential support {}",
            p.support()
        )));
    }
    let cells = (x_max / h).round() as usize;
    if cells.saturating_mul(n) > MAX_UNKNOWNS {
        return Err(SpectralError::OutOfMemory { unknowns: cells.saturating_mul(n) });
    }
    let (m, g) = ghost_factors(bp, h)?;
    let inv_h2 = 1.0 / (h * h);
    let ghost = &m * linalg::diag_re(&g) * m.adjoint();
    let mut blocks = cell_averages(p, h, cells);
    for (j, blk) in blocks.iter_mut().enumerate() {
        *blk += linalg::eye(n) * c(2.0 * inv_h2, 0.0);
        if j == 0 {
            *blk -= &ghost * c(inv_h2, 0.0);
        }
        if j + 1 == cells {
            *blk += linalg::eye(n) * c(inv_h2, 0.0);
        }
        *blk = (&*blk + blk.adjoint()) * c(0.5, 0.0);
    }
    let scalar = (n == 1).then(|| blocks.iter().map(|b| b[(0, 0)].re).collect());
    Ok(DiscreteHamiltonian { n, h, blocks, scalar })
}

impl DiscreteHamiltonian {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn cells(&self) -> usize {
        self.blocks.len()
    }

    /// Cell centres `(j−½)h`.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.cells()).map(|j| (j as f64 + 0.5) * self.h).collect()
    }

    /// Dense matrix, for small instances and tests.
    pub fn to_dense(&self) -> CMat {
        let (n, cells) = (self.n, self.cells());
        let mut out = CMat::zeros(n * cells, n * cells);
        let off = c(-1.0 / (self.h * self.h), 0.0);
        for (j, b) in self.blocks.iter().enumerate() {
            out.view_mut((j * n, j * n), (n, n)).copy_from(b);
            if j + 1 < cells {
                for i in 0..n {
                    out[(j * n + i, (j + 1) * n + i)] = off;
                    out[((j + 1) * n + i, j * n + i)] = off;
                }
            }
        }
        out
    }

    /// `H u` for cell values `u`.
    pub fn apply(&self, u: &[CVec]) -> Vec<CVec> {
        let off = c(-1.0 / (self.h * self.h), 0.0);
        let cells = self.cells();
        (0..cells)
            .map(|j| {
                let mut r = &self.blocks[j] * &u[j];
                if j > 0 {
                    r += &u[j - 1] * off;
                }
                if j + 1 < cells {
                    r += &u[j + 1] * off;
                }
                r
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `sigma`, by Sylvester inertia of the block `LDL†` factors.
    pub fn count_below(&self, sigma: f64) -> usize {
        let e2 = 1.0 / self.h.powi(4);
        let tiny = f64::EPSILON * e2.sqrt();
        if let Some(d) = &self.scalar {
            let mut count = 0;
            let mut q = 1.0;
            for (j, dj) in d.iter().enumerate() {
                q = dj - sigma - if j == 0 { 0.0 } else { e2 / q };
                if q.abs() < tiny {
                    q = -tiny;
                }
                if q < 0.0 {
                    count += 1;
                }
            }
            return count;
        }
        let n = self.n;
        let mut count = 0;
        let mut prev_inv = CMat::zeros(n, n);
        for (j, b) in self.blocks.iter().enumerate() {
            let mut m = b - linalg::eye(n) * c(sigma, 0.0);
            if j > 0 {
                m -= &prev_inv * c(e2, 0.0);
            }
            let (neg, inv) = ldl_inertia_inverse(&m, tiny);
            count += neg;
            prev_inv = inv;
        }
        count
    }

    /// Gershgorin bounds on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let e = 1.0 / (self.h * self.h);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in &self.blocks {
            for i in 0..self.n {
                let r: f64 = (0..self.n).filter(|&l| l != i).map(|l| b[(i, l)].norm()).sum::<f64>() + 2.0 * e;
                lo = lo.min(b[(i, i)].re - r);
                hi = hi.max(b[(i, i)].re + r);
            }
        }
        (lo, hi)
    }

    /// All eigenvalues in `[lo, hi)`, ascending and repeated by multiplicity, to absolute accuracy `tol`.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
        let (glo, _) = self.spectral_bounds();
        let lo = lo.max(glo - 1.0);
        let mut out = Vec::new();
        if hi <= lo {
            return out;
        }
        let (c_lo, c_hi) = (self.count_below(lo), self.count_below(hi));
        self.bisect(lo, hi, c_lo, c_hi, tol, &mut out);
        out
    }

    /// All eigenvalues below `e_max`.
    pub fn eigenvalues_below(&self, e_max: f64, tol: f64) -> Vec<f64> {
        let (glo, _) = self.spectral_bounds();
        self.eigenvalues_in(glo - 1.0, e_max, tol)
    }

    /// `count_below` at several shifts. The scalar path sweeps independent shifts together, which
    /// keeps the division pipeline busy.
    pub fn count_below_many(&self, sigmas: &[f64]) -> Vec<usize> {
        const LANES: usize = 8;
        let Some(d) = &self.scalar else {
            return sigmas.iter().map(|s| self.count_below(*s)).collect();
        };
        let e2 = 1.0 / self.h.powi(4);
        let tiny = f64::EPSILON * e2.sqrt();
        let mut out = Vec::with_capacity(sigmas.len());
        for chunk in sigmas.chunks(LANES) {
            let mut sig = [0.0; LANES];
            sig[..chunk.len()].copy_from_slice(chunk);
            let mut q = [0.0; LANES];
            let mut count = [0usize; LANES];
            for l in 0..LANES {
                q[l] = d[0] - sig[l];
            }
            let step = |q: &mut [f64; LANES], count: &mut [usize; LANES]| {
                for l in 0..LANES {
                    if q[l].abs() < tiny {
                        q[l] = -tiny;
                    }
                    count[l] += (q[l] < 0.0) as usize;
                }
            };
            step(&mut q, &mut count);
            for dj in &d[1..] {
                for l in 0..LANES {
                    q[l] = dj - sig[l] - e2 / q[l];
                }
                step(&mut q, &mut count);
            }
            out.extend_from_slice(&count[..chunk.len()]);
        }
        out
    }

    /// Breadth-first bisection: every round evaluates the midpoints of all open intervals at once.
    fn bisect(&self, lo: f64, hi: f64, c_lo: usize, c_hi: usize, tol: f64, out: &mut Vec<f64>) {
        let mut open = vec![(lo, hi, c_lo, c_hi)];
        while !open.is_empty() {
            let (done, active): (Vec<_>, Vec<_>) = open.into_iter().partition(|(l, h, _, _)| h - l <= tol);
            for (l, h, cl, ch) in done {
                out.extend(std::iter::repeat(0.5 * (l + h)).take(ch - cl));
            }
            let mids: Vec<f64> = active.iter().map(|(l, h, _, _)| 0.5 * (l + h)).collect();
            let counts = self.count_below_many(&mids);
            open = Vec::with_capacity(2 * active.len());
            for ((l, h, cl, ch), (m, cm)) in active.into_iter().zip(mids.into_iter().zip(counts)) {
                if cm > cl {
                    open.push((l, m, cl, cm));
                }
                if ch > cm {
                    open.push((m, h, cm, ch));
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    /// The `count` lowest eigenvalues.
    pub fn lowest(&self, count: usize, tol: f64) -> Vec<f64> {
        let (glo, ghi) = self.spectral_bounds();
        let mut width = 1.0;
        let mut hi = glo + width;
        while self.count_below(hi) < count && hi < ghi {
            width *= 2.0;
            hi = (glo + width).min(ghi + 1.0);
        }
        let mut v = self.eigenvalues_in(glo - 1.0, hi, tol);
        v.truncate(count);
        v
    }

    /// Solves `(H − σ)x = b` by block Thomas elimination.
    pub fn solve_shifted(&self, sigma: f64, b: &[CVec]) -> Vec<CVec> {
        let n = self.n;
        let cells = self.cells();
        let e = -1.0 / (self.h * self.h);
        let tiny = f64::EPSILON / (self.h * self.h);
        let mut dinv: Vec<CMat> = Vec::with_capacity(cells);
        let mut y: Vec<CVec> = Vec::with_capacity(cells);
        for j in 0..cells {
            let mut d = &self.blocks[j] - linalg::eye(n) * c(sigma, 0.0);
            let mut rhs = b[j].clone();
            if j > 0 {
                d -= &dinv[j - 1] * c(e * e, 0.0);
                rhs -= &dinv[j - 1] * &y[j - 1] * c(e, 0.0);
            }
            let inv = linalg::inverse(&d).unwrap_or_else(|| {
                linalg::inverse(&(d + linalg::eye(n) * c(tiny, 0.0))).expect("regularised block is invertible")
            });
            dinv.push(inv);
            y.push(rhs);
        }
        let mut x = vec![CVec::zeros(n); cells];
        for j in (0..cells).rev() {
            let mut r = y[j].clone();
            if j + 1 < cells {
                r -= &x[j + 1] * c(e, 0.0);
            }
            x[j] = &dinv[j] * r;
        }
        x
    }

    /// Discrete inner product `h Σ u_j† v_j`.
    pub fn inner(&self, u: &[CVec], v: &[CVec]) -> C64 {
        u.iter().zip(v).map(|(a, b)| a.dotc(b)).sum::<C64>() * self.h
    }

    /// Eigenvectors for an eigenvalue of the given multiplicity by block inverse iteration.
    pub fn eigenvectors(&self, energy: f64, multiplicity: usize) -> Vec<Vec<CVec>> {
        let n = self.n;
        let cells = self.cells();
        let shift = energy - 1e-9 * energy.abs().max(1.0);
        let mut vecs: Vec<Vec<CVec>> = (0..multiplicity)
            .map(|m| {
                (0..cells)
                    .map(|j| {
                        CVec::from_fn(n, |i, _| {
                            let t = (j * n + i) as f64;
                            c((0.37 * t * (m + 1) as f64 + 0.1).sin() + 1.1, (0.11 * t + m as f64).cos())
                        })
                    })
                    .collect()
            })
            .collect();
        for _ in 0..4 {
            vecs = vecs.iter().map(|v| self.solve_shifted(shift, v)).collect();
            self.orthonormalise(&mut vecs);
        }
        vecs
    }

    fn orthonormalise(&self, vecs: &mut [Vec<CVec>]) {
        for i in 0..vecs.len() {
            for l in 0..i {
                let (head, tail) = vecs.split_at_mut(i);
                let proj = self.inner(&head[l], &tail[0]);
                for (a, b) in tail[0].iter_mut().zip(&head[l]) {
                    *a -= b * proj;
                }
            }
            let nrm = self.inner(&vecs[i], &vecs[i]).re.sqrt();
            for a in vecs[i].iter_mut() {
                *a /= c(nrm, 0.0);
            }
        }
    }

    /// Eigenpairs below `e_max`, grouping numerically equal eigenvalues.
    pub fn eigenpairs_below(&self, e_max: f64, tol: f64) -> Vec<DiscreteEigenpair> {
        let vals = self.eigenvalues_below(e_max, tol);
        let mut out: Vec<DiscreteEigenpair> = Vec::new();
        let mut i = 0;
        while i < vals.len() {
            let mut m = 1;
            while i + m < vals.len() && (vals[i + m] - vals[i]).abs() <= 10.0 * tol {
                m += 1;
            }
            out.push(DiscreteEigenpair { energy: vals[i], vectors: self.eigenvectors(vals[i], m) });
            i += m;
        }
        out
    }
}

/// Negative-pivot count and inverse of a small Hermitian matrix via unpivoted `LDL†`.
fn ldl_inertia_inverse(m: &CMat, tiny: f64) -> (usize, CMat) {
    let n = m.nrows();
    let mut l = CMat::identity(n, n);
    let mut d = vec![0.0; n];
    let mut neg = 0;
    for j in 0..n {
        let mut dj = m[(j, j)].re;
        for k in 0..j {
            dj -= l[(j, k)].norm_sqr() * d[k];
        }
        if dj.abs() < tiny {
            dj = -tiny;
        }
        d[j] = dj;
        if dj < 0.0 {
            neg += 1;
        }
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj() * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    // M⁻¹ = L^{-†} D⁻¹ L⁻¹
    let mut linv = CMat::identity(n, n);
    for j in 0..n {
        for i in j + 1..n {
            let mut s = ZERO;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s;
        }
    }
    let dinv = linalg::diag_re(&d.iter().map(|x| 1.0 / x).collect::<Vec<_>>());
    (neg, linv.adjoint() * dinv * linv)
}
