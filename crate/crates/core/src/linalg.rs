//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
pub use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

pub fn diag(d: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(d))
}

pub fn diag_re(d: &[f64]) -> CMat {
    CMat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { ZERO })
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn cond(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Frobenius norm of `m - m†`.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Frobenius norm of `U†U - I`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    (u.adjoint() * u - eye(u.nrows())).norm()
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let e = SymmetricEigen::new(h);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].partial_cmp(&e.eigenvalues[b]).unwrap());
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), m.ncols(), |r, j| e.eigenvectors[(r, idx[j])]);
    (vals, vecs)
}

/// Eigen-decomposition of a normal matrix through the complex Schur form: `m = Q diag(λ) Q†`.
pub fn normal_eig(m: &CMat) -> (Vec<C64>, CMat) {
    let (q, t) = Schur::new(m.clone()).unpack();
    let vals = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    (vals, q)
}

/// General complex eigenvalues (no vectors).
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    normal_eig(m).0
}

/// Solve `a x = b`; `None` if `a` is singular to working precision.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

/// Solve `x a = b` for `x`.
pub fn solve_right(b: &CMat, a: &CMat) -> Option<CMat> {
    solve(&a.transpose(), &b.transpose()).map(|x| x.transpose())
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

pub fn det(a: &CMat) -> C64 {
    a.clone().lu().determinant()
}

/// Orthonormal basis (columns) of the numerical right null space, with singular values ascending.
pub fn null_space(a: &CMat, dim: usize) -> (CMat, Vec<f64>) {
    let n = a.ncols();
    // right singular vectors of A are eigenvectors of A†A; use the Hermitian solver for stable ordering
    let (vals, vecs) = hermitian_eig(&(a.adjoint() * a));
    let sv: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let basis = vecs.columns(0, dim.min(n)).into_owned();
    (basis, sv)
}

/// Pointwise polar factors of a Hermitian matrix `w`: `(sqrt|w|, U sqrt|w|)` with `w = U|w|`.
pub fn polar_sqrt(w: &CMat) -> (CMat, CMat) {
    let (vals, vecs) = hermitian_eig(w);
    let s: Vec<f64> = vals.iter().map(|v| v.abs().sqrt()).collect();
    let us: Vec<f64> = vals.iter().map(|v| v.signum() * v.abs().sqrt()).collect();
    let v1 = &vecs * diag_re(&s) * vecs.adjoint();
    let v2 = &vecs * diag_re(&us) * vecs.adjoint();
    (v1, v2)
}

/// Principal argument wrapped into (-π, π].
pub fn wrap_pi(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
