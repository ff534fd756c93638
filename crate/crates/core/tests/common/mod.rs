//! Shared helpers and independent analytic oracles for the integration tests.
#![allow(dead_code)]

use matscat::bc::BoundaryPair;
use matscat::linalg::{self, c, CMat};
use matscat::C64;
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut StdRng) -> f64 {
    // Box–Muller
    let u: f64 = r.gen_range(1e-12..1.0);
    let v: f64 = r.gen_range(0.0..1.0);
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

pub fn random_matrix(r: &mut StdRng, n: usize) -> CMat {
    DMatrix::from_fn(n, n, |_, _| c(gaussian(r), gaussian(r)))
}

pub fn random_unitary(r: &mut StdRng, n: usize) -> CMat {
    let q = random_matrix(r, n).qr().q();
    q
}

pub fn random_hermitian(r: &mut StdRng, n: usize, scale: f64) -> CMat {
    let g = random_matrix(r, n);
    (&g + g.adjoint()) * c(0.5 * scale, 0.0)
}

/// Invertible matrix with singular values log-uniform in `[1, cond_max]`.
pub fn random_invertible(r: &mut StdRng, n: usize, cond_max: f64) -> CMat {
    let u = random_unitary(r, n);
    let w = random_unitary(r, n);
    let s: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { cond_max.powf(r.gen_range(0.0..1.0)) }).collect();
    u * linalg::diag_re(&s) * w
}

/// A random valid boundary pair mixing channel types.
pub fn random_bc(r: &mut StdRng, n: usize) -> BoundaryPair {
    let m = random_unitary(r, n);
    let thetas: Vec<f64> = (0..n)
        .map(|_| match r.gen_range(0..4) {
            0 => std::f64::consts::PI,
            1 => std::f64::consts::FRAC_PI_2,
            _ => r.gen_range(0.2..2.9),
        })
        .collect();
    let t = random_invertible(r, n, 10.0);
    BoundaryPair::from_normal_data(&m, &thetas, &t).unwrap()
}

pub fn csqrt(z: C64) -> C64 {
    z.sqrt()
}

/// Scalar square well `V = −v0` on `[0, a]`: `(f(k,0), f'(k,0))` by two-region matching.
pub fn square_well_jost_origin(v0: f64, a: f64, k: C64) -> (C64, C64) {
    let q = csqrt(k * k + v0);
    let ik = c(0.0, 1.0) * k;
    let e = (ik * a).exp();
    let qa = q * a;
    let f0 = e * qa.cos() - ik * e * qa.sin() / q;
    let df0 = q * e * qa.sin() + ik * e * qa.cos();
    (f0, df0)
}

/// Scalar Jost matrix `conj(f(−k*,0)) B − conj(f'(−k*,0)) A` for the square well.
pub fn square_well_jost_matrix(v0: f64, a: f64, k: C64, aa: C64, bb: C64) -> C64 {
    let (f0, df0) = square_well_jost_origin(v0, a, -k.conj());
    f0.conj() * bb - df0.conj() * aa
}

/// Dirichlet bound states of the scalar square well: roots of `q cot(qa) = −κ`, `q = √(v0 − κ²)`.
pub fn square_well_dirichlet_kappas(v0: f64, a: f64) -> Vec<f64> {
    let g = |kappa: f64| {
        let q = (v0 - kappa * kappa).sqrt();
        // q cos(qa) + κ sin(qa), free of cot poles
        q * (q * a).cos() + kappa * (q * a).sin()
    };
    let kmax = v0.sqrt();
    let steps = 20000;
    let mut roots = Vec::new();
    for i in 0..steps {
        let (x0, x1) = (kmax * i as f64 / steps as f64, kmax * (i + 1) as f64 / steps as f64);
        let (g0, g1) = (g(x0.max(1e-14)), g(x1 * (1.0 - 1e-15)));
        if g0 * g1 < 0.0 {
            let (mut lo, mut hi) = (x0.max(1e-14), x1 * (1.0 - 1e-15));
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(lo) * g(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots
}

pub fn max_norm_diff(a: &[CMat], b: &[CMat]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect()
}
