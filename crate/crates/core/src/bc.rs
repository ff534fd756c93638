//! Self-adjoint vertex conditions `-B†ψ(0) + A†ψ'(0) = 0` and their diagonal normal form.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{self, c, CMat, I};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BcError {
    #[error("dimension mismatch: A is {a_rows}x{a_cols}, B is {b_rows}x{b_cols}")]
    DimensionMismatch { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("invalid boundary condition: {0}")]
    InvalidBc(String),
    #[error("transformation matrix is numerically singular (cond = {0:e})")]
    SingularT(f64),
    #[error("matrix is not unitary (defect = {0:e})")]
    NotUnitary(f64),
}

impl BcError {
    pub fn name(&self) -> &'static str {
        match self {
            BcError::DimensionMismatch { .. } => "DimensionMismatch",
            BcError::NonFinite => "NonFinite",
            BcError::InvalidBc(_) => "InvalidBC",
            BcError::SingularT(_) => "SingularT",
            BcError::NotUnitary(_) => "NotUnitary",
        }
    }
}

/// Thresholds used by validation and normal-form extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BcTolerances {
    /// Relative bound on `‖A†B − B†A‖`, measured against `‖A†A + B†B‖`.
    pub hermiticity: f64,
    /// Smallest eigenvalue of `A†A + B†B` must exceed this fraction of the largest.
    pub positivity: f64,
    pub unitarity: f64,
    /// Eigenvalues of the Cayley matrix closer than this (but not equal) raise the near-degeneracy flag.
    pub cluster: f64,
    /// Angles within this distance of π or π/2 are snapped to the Dirichlet or Neumann class.
    pub classify: f64,
    pub cond_max: f64,
}

impl Default for BcTolerances {
    fn default() -> Self {
        BcTolerances {
            hermiticity: 1e-10,
            positivity: 1e-12,
            unitarity: 1e-10,
            cluster: 1e-8,
            classify: 1e-9,
            cond_max: 1e12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub hermiticity_defect: f64,
    pub min_eig: f64,
    pub max_eig: f64,
}

/// Checks shape, finiteness, Hermiticity of `A†B` and positivity of `A†A + B†B`.
pub fn validate_bc(a: &CMat, b: &CMat, tol: &BcTolerances) -> Result<ValidationReport, BcError> {
    if !a.is_square() || !b.is_square() || a.shape() != b.shape() || a.nrows() == 0 {
        return Err(BcError::DimensionMismatch {
            a_rows: a.nrows(),
            a_cols: a.ncols(),
            b_rows: b.nrows(),
            b_cols: b.ncols(),
        });
    }
    if !linalg::is_finite(a) || !linalg::is_finite(b) {
        return Err(BcError::NonFinite);
    }
    let ab = a.adjoint() * b;
    let gram = a.adjoint() * a + b.adjoint() * b;
    let hermiticity_defect = linalg::hermiticity_defect(&ab);
    let (eigs, _) = linalg::hermitian_eig(&gram);
    let min_eig = eigs[0];
    let max_eig = *eigs.last().unwrap();
    let scale = gram.norm();
    let ok = hermiticity_defect <= tol.hermiticity * scale && min_eig > tol.positivity * max_eig && max_eig > 0.0;
    Ok(ValidationReport { ok, hermiticity_defect, min_eig, max_eig })
}

/// A validated vertex condition.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPair {
    a: CMat,
    b: CMat,
}

impl BoundaryPair {
    pub fn new(a: CMat, b: CMat) -> Result<Self, BcError> {
        Self::with_tolerances(a, b, &BcTolerances::default())
    }

    pub fn with_tolerances(a: CMat, b: CMat, tol: &BcTolerances) -> Result<Self, BcError> {
        let r = validate_bc(&a, &b, tol)?;
        if !r.ok {
            return Err(BcError::InvalidBc(format!(
                "hermiticity defect {:e}, smallest eigenvalue of A†A+B†B {:e}",
                r.hermiticity_defect, r.min_eig
            )));
        }
        Ok(BoundaryPair { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    /// `A = 0, B = −I`.
    pub fn dirichlet(n: usize) -> Self {
        Self::diagonal(&vec![PI; n])
    }

    /// `A = −I, B = 0`.
    pub fn neumann(n: usize) -> Self {
        Self::diagonal(&vec![FRAC_PI_2; n])
    }

    /// Continuity of `ψ(0)` across channels and vanishing sum of derivatives.
    pub fn kirchhoff(n: usize) -> Self {
        let mut a = linalg::zeros(n);
        let mut b = linalg::zeros(n);
        for i in 0..n {
            a[(i, n - 1)] = c(1.0, 0.0);
        }
        for j in 0..n.saturating_sub(1) {
            // row j of B† is −(e_j − e_{j+1})
            b[(j, j)] = c(-1.0, 0.0);
            b[(j + 1, j)] = c(1.0, 0.0);
        }
        BoundaryPair { a, b }
    }

    /// Diagonal pair `Ã = −diag(sin θ)`, `B̃ = diag(cos θ)`.
    pub fn diagonal(thetas: &[f64]) -> Self {
        let (a, b) = diagonal_pair(thetas);
        BoundaryPair { a, b }
    }

    /// Pair `(M Ã M† T, M B̃ M† T)` built from normal-form data.
    pub fn from_normal_data(m: &CMat, thetas: &[f64], t: &CMat) -> Result<Self, BcError> {
        let (at, bt) = diagonal_pair(thetas);
        let a = m * at * m.adjoint() * t;
        let b = m * bt * m.adjoint() * t;
        Self::new(a, b)
    }

    /// The unitary `U = −(B + iA)(B − iA)⁻¹`, equal to `S₀(1)`.
    pub fn cayley(&self) -> Result<CMat, BcError> {
        let plus = &self.b + &self.a * I;
        let minus = &self.b - &self.a * I;
        let x = linalg::solve_right(&plus, &minus).ok_or_else(|| BcError::InvalidBc("B − iA is singular".into()))?;
        Ok(-x)
    }

    pub fn normal_form(&self) -> Result<NormalForm, BcError> {
        normal_form(self, &BcTolerances::default())
    }
}

fn diagonal_pair(thetas: &[f64]) -> (CMat, CMat) {
    let s: Vec<f64> = thetas.iter().map(|t| if *t == PI { 0.0 } else { -t.sin() }).collect();
    let co: Vec<f64> = thetas.iter().map(|t| if *t == FRAC_PI_2 { 0.0 } else { t.cos() }).collect();
    (linalg::diag_re(&s), linalg::diag_re(&co))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelKind {
    Mixed,
    Dirichlet,
    Neumann,
}

/// Diagonal normal form `A = M Ã T₂ M† T₁`, `B = M B̃ T₂ M† T₁`.
///
/// The split into `T₁` and `T₂` is not unique; this type always returns `T₂ = I` and
/// `T₁ = M(Ã M†A + B̃ M†B)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalForm {
    #[serde(skip)]
    pub m: CMat,
    pub thetas: Vec<f64>,
    #[serde(skip)]
    pub t1: CMat,
    #[serde(skip)]
    pub t2: CMat,
    pub n_mixed: usize,
    pub n_dirichlet: usize,
    pub n_neumann: usize,
    pub near_degenerate: bool,
    pub reconstruction_defect: f64,
}

impl NormalForm {
    pub fn n(&self) -> usize {
        self.thetas.len()
    }

    pub fn a_tilde(&self) -> CMat {
        diagonal_pair(&self.thetas).0
    }

    pub fn b_tilde(&self) -> CMat {
        diagonal_pair(&self.thetas).1
    }

    pub fn kind(&self, j: usize) -> ChannelKind {
        if j < self.n_mixed {
            ChannelKind::Mixed
        } else if j < self.n_mixed + self.n_dirichlet {
            ChannelKind::Dirichlet
        } else {
            ChannelKind::Neumann
        }
    }

    pub fn reconstruct(&self) -> (CMat, CMat) {
        let mt = self.m.adjoint();
        (
            &self.m * self.a_tilde() * &self.t2 * &mt * &self.t1,
            &self.m * self.b_tilde() * &self.t2 * &mt * &self.t1,
        )
    }

    /// `diag(I, −I, I)` over (mixed, Dirichlet, Neumann) blocks.
    pub fn z0(&self) -> CMat {
        let d: Vec<f64> = (0..self.n())
            .map(|j| if self.kind(j) == ChannelKind::Dirichlet { -1.0 } else { 1.0 })
            .collect();
        linalg::diag_re(&d)
    }

    /// `diag(cot θ)` on mixed channels, zero elsewhere.
    pub fn z1(&self) -> CMat {
        let d: Vec<f64> = (0..self.n())
            .map(|j| if self.kind(j) == ChannelKind::Mixed { 1.0 / self.thetas[j].tan() } else { 0.0 })
            .collect();
        linalg::diag_re(&d)
    }

    /// Vertex coupling `M Θ M†` of the quadratic form.
    pub fn vertex_matrix(&self) -> CMat {
        &self.m * self.z1() * self.m.adjoint()
    }

    /// `M Z₀ M†`, the high-energy limit of the scattering matrix.
    pub fn s_inf(&self) -> CMat {
        &self.m * self.z0() * self.m.adjoint()
    }
}

fn angle_from_eigenvalue(lam: num_complex::Complex64) -> f64 {
    // λ = −e^{−2iθ}
    let mut th = -(-lam).arg() / 2.0;
    if th <= 0.0 {
        th += PI;
    }
    th
}

fn lex_cmp(a: &[(f64, f64)], b: &[(f64, f64)]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            o => return o,
        }
        match x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

/// Extracts `(M, θ, T₁, T₂)` from the eigen-decomposition of the Cayley matrix.
pub fn normal_form(bp: &BoundaryPair, tol: &BcTolerances) -> Result<NormalForm, BcError> {
    let n = bp.n();
    let u = bp.cayley()?;
    let ud = linalg::unitarity_defect(&u);
    if ud > tol.unitarity * (n as f64).sqrt() * 1e3 {
        return Err(BcError::InvalidBc(format!("Cayley matrix is not unitary (defect {ud:e})")));
    }
    let (lams, q) = linalg::normal_eig(&u);

    struct Chan {
        theta: f64,
        kind: ChannelKind,
        vec: Vec<num_complex::Complex64>,
        key: Vec<(f64, f64)>,
    }
    let mut chans: Vec<Chan> = Vec::with_capacity(n);
    for (j, lam) in lams.iter().enumerate() {
        let mut theta = angle_from_eigenvalue(*lam);
        let kind = if (theta - PI).abs() < tol.classify || theta < tol.classify {
            theta = PI;
            ChannelKind::Dirichlet
        } else if (theta - FRAC_PI_2).abs() < tol.classify {
            theta = FRAC_PI_2;
            ChannelKind::Neumann
        } else {
            ChannelKind::Mixed
        };
        let mut vec: Vec<_> = q.column(j).iter().copied().collect();
        // fix the phase freedom: first non-negligible entry real positive
        if let Some(p) = vec.iter().find(|z| z.norm() > 1e-12).copied() {
            let ph = p.conj() / p.norm();
            for z in vec.iter_mut() {
                *z *= ph;
            }
        }
        let key = vec.iter().map(|z| (z.re, z.im)).collect();
        chans.push(Chan { theta, kind, vec, key });
    }
    let rank = |k: ChannelKind| match k {
        ChannelKind::Mixed => 0,
        ChannelKind::Dirichlet => 1,
        ChannelKind::Neumann => 2,
    };
    chans.sort_by(|x, y| {
        rank(x.kind)
            .cmp(&rank(y.kind))
            .then(x.theta.partial_cmp(&y.theta).unwrap_or(Ordering::Equal))
            .then_with(|| lex_cmp(&x.key, &y.key))
    });

    let mut near_degenerate = false;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (lams[i] - lams[j]).norm();
            if d > 1e-12 && d < tol.cluster {
                near_degenerate = true;
            }
        }
    }

    let m = CMat::from_fn(n, n, |r, j| chans[j].vec[r]);
    let thetas: Vec<f64> = chans.iter().map(|ch| ch.theta).collect();
    let count = |k| chans.iter().filter(|ch| ch.kind == k).count();
    let (at, bt) = diagonal_pair(&thetas);
    let mt = m.adjoint();
    let t1 = &m * (&at * &mt * bp.a() + &bt * &mt * bp.b());
    let mut nf = NormalForm {
        m,
        thetas,
        t1,
        t2: linalg::eye(n),
        n_mixed: count(ChannelKind::Mixed),
        n_dirichlet: count(ChannelKind::Dirichlet),
        n_neumann: count(ChannelKind::Neumann),
        near_degenerate,
        reconstruction_defect: 0.0,
    };
    let (ra, rb) = nf.reconstruct();
    let scale = bp.a().norm() + bp.b().norm();
    nf.reconstruction_defect = ((ra - bp.a()).norm() + (rb - bp.b()).norm()) / scale;
    if nf.reconstruction_defect > 1e-6 {
        return Err(BcError::InvalidBc(format!(
            "normal form does not reproduce the pair (defect {:e})",
            nf.reconstruction_defect
        )));
    }
    Ok(nf)
}

/// `(A, B) ↦ (AT, BT)`; the operator is unchanged.
pub fn transform_bc(bp: &BoundaryPair, t: &CMat, tol: &BcTolerances) -> Result<BoundaryPair, BcError> {
    if t.shape() != (bp.n(), bp.n()) {
        return Err(BcError::DimensionMismatch {
            a_rows: bp.n(),
            a_cols: bp.n(),
            b_rows: t.nrows(),
            b_cols: t.ncols(),
        });
    }
    if !linalg::is_finite(t) {
        return Err(BcError::NonFinite);
    }
    let k = linalg::cond(t);
    if !(k < tol.cond_max) {
        return Err(BcError::SingularT(k));
    }
    BoundaryPair::with_tolerances(bp.a() * t, bp.b() * t, tol)
}

/// `(A, B) ↦ (MAM†, MBM†)` for unitary `M`.
pub fn conjugate_bc(bp: &BoundaryPair, m: &CMat, tol: &BcTolerances) -> Result<BoundaryPair, BcError> {
    if m.shape() != (bp.n(), bp.n()) {
        return Err(BcError::DimensionMismatch {
            a_rows: bp.n(),
            a_cols: bp.n(),
            b_rows: m.nrows(),
            b_cols: m.ncols(),
        });
    }
    let d = linalg::unitarity_defect(m);
    if !(d <= tol.unitarity * bp.n() as f64) {
        return Err(BcError::NotUnitary(d));
    }
    BoundaryPair::with_tolerances(m * bp.a() * m.adjoint(), m * bp.b() * m.adjoint(), tol)
}
