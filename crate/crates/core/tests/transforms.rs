mod common;

use std::f64::consts::{FRAC_2_PI, PI};

use common::*;
use matscat::bc::{transform_bc, BcTolerances, BoundaryPair};
use matscat::linalg::{c, CMat, CVec, C64};
use matscat::ode::OdeOptions;
use matscat::potential::PotentialSpec;
use matscat::solutions::{jost_solution, physical_solution, regular_solution};
use matscat::spectral::{bound_states, BoundStateOptions, KappaRange};
use matscat::transforms::*;

fn opts() -> OdeOptions {
    OdeOptions::default()
}

fn off(re: f64, im: f64) -> SpectralParameter {
    SpectralParameter::Off { re, im }
}

fn one_well() -> PotentialSpec {
    PotentialSpec::square_well(1, (0.6 * PI).powi(2), 1.0)
}

fn scalar(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> CVec {
    move |x| CVec::from_element(1, c(f(x), 0.0))
}

/// Smooth bump supported in `(0.2, 3)`.
fn bump(x: f64) -> f64 {
    if x > 0.2 && x < 3.0 {
        (-1.0 / ((x - 0.2) * (3.0 - x))).exp() * (1.0 + x)
    } else {
        0.0
    }
}

#[test]
fn free_neumann_kernel_closed_form() {
    let bp = BoundaryPair::neumann(1);
    for (x, y) in [(0.0, 0.0), (0.3, 1.7), (2.0, 0.5), (4.0, 4.0)] {
        let k = free_resolvent_kernel(&bp, off(-1.0, 0.0), x, y).unwrap()[(0, 0)];
        // Green's function of −d² + 1 with ψ'(0) = 0
        let expected = 0.5 * ((-(x - y as f64).abs()).exp() + (-(x + y)).exp());
        assert!((k - c(expected, 0.0)).norm() < 1e-14, "{k} vs {expected}");
    }
}

#[test]
fn free_dirichlet_kernel_closed_form() {
    let bp = BoundaryPair::dirichlet(1);
    let (x, y) = (0.4, 1.3);
    let k = free_resolvent_kernel(&bp, off(-4.0, 0.0), x, y).unwrap()[(0, 0)];
    let expected = (2.0 * x).sinh() / 2.0 * (-2.0 * y).exp();
    assert!((k - c(expected, 0.0)).norm() < 1e-14);
}

#[test]
fn free_kernel_satisfies_discrete_equation() {
    // second differences of a column reproduce −K'' + K = δ away from the diagonal
    let bp = BoundaryPair::neumann(1);
    let h = 1e-3;
    let y = 1.0;
    let k = |x: f64| free_resolvent_kernel(&bp, off(-1.0, 0.0), x, y).unwrap()[(0, 0)];
    for x in [0.3, 0.8, 1.5, 3.0] {
        let lap = (k(x + h) - k(x) * 2.0 + k(x - h)) / (h * h);
        assert!((-lap + k(x)).norm() < 1e-6);
    }
    let jump = (k(y + h) - k(y)) / h - (k(y) - k(y - h)) / h;
    assert!((jump + 1.0).norm() < 2e-3);
}

#[test]
fn free_kernel_detects_free_bound_state() {
    let theta: f64 = 0.6;
    let kappa = 1.0 / theta.tan();
    let bp = BoundaryPair::diagonal(&[theta]);
    let r = free_resolvent_kernel(&bp, off(-kappa * kappa, 0.0), 0.5, 0.5);
    assert!(matches!(r, Err(TransformError::SpectralPoint { .. })));
    assert!(free_resolvent_kernel(&bp, off(-kappa * kappa - 0.1, 0.0), 0.5, 0.5).is_ok());
}

#[test]
fn free_kernel_is_symmetric_for_real_conditions() {
    let bp = BoundaryPair::diagonal(&[0.4, PI, 2.0]);
    let grid = linspace(0.0, 3.0, 7);
    for x in &grid {
        for y in &grid {
            let a = free_resolvent_kernel(&bp, off(-2.5, 0.0), *x, *y).unwrap();
            let b = free_resolvent_kernel(&bp, off(-2.5, 0.0), *y, *x).unwrap();
            assert!((&a - b.transpose()).norm() < 1e-14);
        }
    }
}

#[test]
fn free_boundary_values_decay_like_inverse_wavenumber() {
    let mut r = rng(3);
    let bp = random_bc(&mut r, 2);
    let grid = linspace(0.0, 5.0, 41);
    let sup = |lambda: f64| {
        let mut s: f64 = 0.0;
        for x in &grid {
            for y in &grid {
                s = s.max(free_resolvent_kernel(&bp, SpectralParameter::Above(lambda), *x, *y).unwrap().norm());
            }
        }
        s * lambda.sqrt()
    };
    let consts: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|l| sup(*l)).collect();
    let (lo, hi) = consts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi / lo < 3.0, "{consts:?}");
}

#[test]
fn free_jump_across_the_cut_is_anti_hermitian() {
    let mut r = rng(4);
    let bp = random_bc(&mut r, 2);
    let lambda = 2.3;
    for (x, y) in [(0.2, 1.1), (1.5, 0.4)] {
        let jump = |x, y| {
            free_resolvent_kernel(&bp, SpectralParameter::Above(lambda), x, y).unwrap()
                - free_resolvent_kernel(&bp, SpectralParameter::Below(lambda), x, y).unwrap()
        };
        assert!((jump(x, y) + jump(y, x).adjoint()).norm() < 1e-12);
    }
}

#[test]
fn zero_potential_resolvent_is_the_free_one() {
    let mut r = rng(6);
    let bp = random_bc(&mut r, 2);
    let grid = [0.0, 0.7, 2.0];
    let z = off(-1.5, 0.4);
    let k = resolvent_kernel(&PotentialSpec::zero(2), &bp, z, &grid, &ResolventOptions::default()).unwrap();
    for (i, x) in grid.iter().enumerate() {
        for (j, y) in grid.iter().enumerate() {
            assert_eq!(k.at(i, j), &free_resolvent_kernel(&bp, z, *x, *y).unwrap());
        }
    }
}

#[test]
fn full_resolvent_matches_jost_regular_green_function() {
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let kk = c(0.0, 2.0);
    let grid = [0.1, 0.5, 0.9, 1.0, 1.6, 3.0];
    let phi = regular_solution(&p, &bp, kk, &grid, &opts()).unwrap();
    let f = jost_solution(&p, kk, &grid, &opts()).unwrap();
    let w = f.values[0][(0, 0)] * phi.derivs[0][(0, 0)] - f.derivs[0][(0, 0)] * phi.values[0][(0, 0)];
    let ro = ResolventOptions { node_spacing: 2e-3, ..Default::default() };
    let k = resolvent_kernel(&p, &bp, off(-4.0, 0.0), &grid, &ro).unwrap();
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let (lo, hi) = (i.min(j), i.max(j));
            let expected = phi.values[lo][(0, 0)] * f.values[hi][(0, 0)] / w;
            assert!((k.at(i, j)[(0, 0)] - expected).norm() < 1e-5, "{i} {j}");
        }
    }
}

#[test]
fn full_resolvent_jump_reproduces_spectral_density() {
    // (R(k²+i0) − R(k²−i0)) 2k / (2πi) = (2/π) ψ(k,x) ψ(k,y)†
    let mut r = rng(10);
    let bp = random_bc(&mut r, 2);
    let p = PotentialSpec::coupled_well(2, None, 0.5, 1.0).unwrap();
    let k = 1.3;
    let ro = ResolventOptions { node_spacing: 2e-3, ..Default::default() };
    let above = Resolvent::new(&p, &bp, SpectralParameter::Above(k * k), &ro).unwrap();
    let below = Resolvent::new(&p, &bp, SpectralParameter::Below(k * k), &ro).unwrap();
    let grid = [0.3, 1.4];
    let psi = physical_solution(&p, &bp, k, &grid, &opts()).unwrap().sample.values;
    for (i, x) in grid.iter().enumerate() {
        for (j, y) in grid.iter().enumerate() {
            let jump = (above.kernel(*x, *y) - below.kernel(*x, *y)) * (c(2.0 * k, 0.0) / c(0.0, 2.0 * PI));
            let density = &psi[i] * psi[j].adjoint() * c(FRAC_2_PI, 0.0);
            assert!((jump - density).norm() < 1e-4, "{x} {y}");
        }
    }
}

#[test]
fn full_resolvent_discrete_residual_is_small() {
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let ro = ResolventOptions { node_spacing: 2e-3, ..Default::default() };
    let r = Resolvent::new(&p, &bp, off(-4.0, 0.0), &ro).unwrap();
    for cell in [1, 250, 700] {
        assert!(resolvent_residual(&r, &p, &bp, cell, 4.0).unwrap() < 1e-5);
    }
    assert!(resolvent_residual(&r, &p, &bp, 0, 4.0).is_err());
}

#[test]
fn near_singular_q_close_to_a_bound_state() {
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let e = bound_states(&p, &bp, KappaRange::default_for(&p, &bp).unwrap(), &BoundStateOptions::default())
        .unwrap()[0]
        .energy;
    let ro = ResolventOptions::default();
    let r = Resolvent::new(&p, &bp, off(e + 1e-3, 0.0), &ro);
    assert!(matches!(r, Err(TransformError::NearSingularQ { .. })), "{r:?}");
    let r = Resolvent::new(&p, &bp, off(e + 0.05, 0.0), &ro).unwrap();
    let d = r.pole_distance().unwrap();
    assert!((d - 0.05).abs() < 0.01, "{d}");
}

#[test]
fn resolvent_size_guard_coarsens_nodes() {
    let p = PotentialSpec::coupled_well(2, None, 0.5, 1.0).unwrap();
    let ro = ResolventOptions { node_spacing: 1e-4, max_unknowns: 200, ..Default::default() };
    let r = Resolvent::new(&p, &BoundaryPair::neumann(2), off(-1.0, 0.0), &ro).unwrap();
    assert_eq!(r.nodes().len(), 100);
    assert!((r.node_spacing() - 0.01).abs() < 1e-12);
}

#[test]
fn cosine_transform_of_exponential() {
    let xq = Quadrature::trapezoid(0.0, 40.0, 40001);
    let psi = GridFunction::from_fn(xq, scalar(|x| (-x).exp())).unwrap();
    let kq = Quadrature::gauss_legendre(0.0, 10.0, 5, 8);
    let f = cosine_transform(&psi, &kq);
    for (k, v) in kq.nodes.iter().zip(&f.values) {
        let expected = FRAC_2_PI.sqrt() / (1.0 + k * k);
        assert!((v[0] - c(expected, 0.0)).norm() < 1e-6);
    }
    let zero = GridFunction::from_fn(Quadrature::trapezoid(0.0, 1.0, 11), scalar(|_| 0.0)).unwrap();
    assert_eq!(cosine_transform(&zero, &kq).norm(), 0.0);
}

#[test]
fn cosine_transform_preserves_norm() {
    let psi = GridFunction::from_fn(Quadrature::trapezoid(0.0, 3.0, 3001), scalar(bump)).unwrap();
    let kq = Quadrature::gauss_legendre(0.0, 80.0, 160, 8);
    let f = cosine_transform(&psi, &kq);
    assert!((f.norm() - psi.norm()).abs() < 1e-4 * psi.norm());
}

#[test]
fn free_neumann_fourier_maps_are_the_cosine_transform() {
    let psi = GridFunction::from_fn(Quadrature::trapezoid(0.0, 3.0, 601), scalar(bump)).unwrap();
    let kq = Quadrature::gauss_legendre(0.05, 20.0, 10, 8);
    let p = PotentialSpec::zero(1);
    let bp = BoundaryPair::neumann(1);
    let cos = cosine_transform(&psi, &kq);
    for sign in [Sign::Plus, Sign::Minus] {
        let f = fourier_apply(&p, &bp, sign, &psi, &kq, &opts()).unwrap();
        assert!(f.distance(&cos) < 1e-10);
    }
    // self-adjoint: the adjoint map is the cosine transform as well
    let back = fourier_adjoint_apply(&p, &bp, Sign::Plus, &cos, &psi.quad, &opts()).unwrap();
    assert!(back.distance(&cosine_transform(&cos, &psi.quad)) < 1e-10);
}

#[test]
fn free_dirichlet_fourier_maps_are_sine_transforms() {
    let psi = GridFunction::from_fn(Quadrature::trapezoid(0.0, 3.0, 601), scalar(bump)).unwrap();
    let kq = Quadrature::gauss_legendre(0.05, 10.0, 5, 8);
    let p = PotentialSpec::zero(1);
    let bp = BoundaryPair::dirichlet(1);
    let sine: Vec<C64> = kq
        .nodes
        .iter()
        .map(|k| {
            let s: f64 = psi.grid().iter().zip(&psi.quad.weights).map(|(x, w)| w * (k * x).sin() * bump(*x)).sum();
            c(FRAC_2_PI.sqrt() * s, 0.0)
        })
        .collect();
    // ψ±(k, x) = ±i sin kx, so F± = ∓i × sine transform
    for (sign, factor) in [(Sign::Plus, c(0.0, -1.0)), (Sign::Minus, c(0.0, 1.0))] {
        let f = fourier_apply(&p, &bp, sign, &psi, &kq, &opts()).unwrap();
        for (v, s) in f.values.iter().zip(&sine) {
            assert!((v[0] - factor * s).norm() < 1e-12);
        }
    }
}

#[test]
fn parseval_with_bound_state_deflation() {
    let psi = GridFunction::from_fn(Quadrature::trapezoid(0.0, 4.0, 2001), scalar(bump)).unwrap();
    let kq = Quadrature::gauss_legendre(0.0, 40.0, 80, 8);
    let defl = DeflationOptions { h: 2e-3, x_max: 30.0 };
    let rep = parseval_check(&one_well(), &BoundaryPair::dirichlet(1), Sign::Plus, &psi, &kq, &defl, &opts()).unwrap();
    assert_eq!(rep.bound_states, 1);
    assert!(rep.bound_projection_sq > 0.1 * rep.norm_sq);
    assert!(rep.defect < 1e-3, "{rep:?}");
}

#[test]
fn adjoint_composition_projects_out_the_bound_state() {
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    // wide enough to hold the slowly decaying bound state
    let xq = Quadrature::trapezoid(0.0, 30.0, 15001);
    let psi = GridFunction::from_fn(xq.clone(), scalar(bump)).unwrap();
    let kq = Quadrature::gauss_legendre(0.0, 40.0, 80, 8);
    let f = fourier_apply(&p, &bp, Sign::Minus, &psi, &kq, &opts()).unwrap();
    let back = fourier_adjoint_apply(&p, &bp, Sign::Minus, &f, &xq, &opts()).unwrap();
    // the bound-state component is what is missing
    let missing = GridFunction { quad: xq, values: psi.values.iter().zip(&back.values).map(|(a, b)| a - b).collect() };
    let proj = bound_state_projections(&p, &bp, &psi, &DeflationOptions { h: 2e-3, x_max: 30.0 }).unwrap();
    assert!((missing.norm().powi(2) - proj[0].norm_sqr()).abs() < 1e-3 * psi.norm().powi(2));
    // and nothing of the bound state survives in the reconstruction
    let proj_back = bound_state_projections(&p, &bp, &back, &DeflationOptions { h: 2e-3, x_max: 30.0 }).unwrap();
    assert!(proj_back[0].norm() < 1e-3 * psi.norm());
}

#[test]
fn fourier_map_intertwines_the_hamiltonian() {
    // F(Hψ) = k² Fψ for ψ supported outside the well, where Hψ = −ψ''
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let g = |x: f64| if x > 1.2 && x < 4.0 { (-1.0 / ((x - 1.2) * (4.0 - x))).exp() } else { 0.0 };
    let xq = Quadrature::trapezoid(0.0, 5.0, 5001);
    let h = 1e-4;
    let psi = GridFunction::from_fn(xq.clone(), scalar(g)).unwrap();
    let hpsi = GridFunction::from_fn(xq, scalar(|x| -(g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h))).unwrap();
    let kq = Quadrature::gauss_legendre(0.5, 4.0, 4, 8);
    let f = fourier_apply(&p, &bp, Sign::Plus, &psi, &kq, &opts()).unwrap();
    let fh = fourier_apply(&p, &bp, Sign::Plus, &hpsi, &kq, &opts()).unwrap();
    for ((k, a), b) in kq.nodes.iter().zip(&f.values).zip(&fh.values) {
        assert!((b[0] - a[0] * (k * k)).norm() < 1e-4, "{k}");
    }
}

#[test]
fn wave_operators_free_identity_and_isometry() {
    // a Gaussian keeps the k-side tail beyond the cutoff negligible
    let xq = Quadrature::trapezoid(0.0, 4.0, 2001);
    let psi = GridFunction::from_fn(xq.clone(), scalar(|x| (-4.0 * (x - 2.0).powi(2)).exp())).unwrap();
    let kq = Quadrature::gauss_legendre(0.0, 40.0, 80, 8);
    let w = wave_operator_apply(&PotentialSpec::zero(1), &BoundaryPair::neumann(1), Sign::Plus, &psi, &kq, &opts())
        .unwrap();
    assert!(w.distance(&psi) < 1e-6 * psi.norm());

    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let wide = Quadrature::trapezoid(0.0, 30.0, 15001);
    // zero mean, so F₀ψ vanishes at k = 0 and W±ψ decays fast enough to fit in the window
    let odd = |x: f64| (x - 2.0) * (-4.0 * (x - 2.0).powi(2)).exp();
    let psi = GridFunction::from_fn(xq, scalar(odd)).unwrap();
    let psi_wide = GridFunction::from_fn(wide, scalar(odd)).unwrap();
    for sign in [Sign::Plus, Sign::Minus] {
        let w = wave_operator_apply(&p, &bp, sign, &psi_wide, &kq, &opts()).unwrap();
        assert!((w.norm() - psi.norm()).abs() < 1e-3 * psi.norm());
        let proj = bound_state_projections(&p, &bp, &w, &DeflationOptions { h: 2e-3, x_max: 30.0 }).unwrap();
        assert!(proj[0].norm() < 1e-3 * psi.norm());
    }
}

fn gaussian_k(k: f64) -> CVec {
    CVec::from_element(1, c((-(k - 2.75f64).powi(2) / 0.32).exp(), 0.0))
}

#[test]
fn scattering_operator_is_multiplication_by_s() {
    let kq = Quadrature::gauss_legendre(0.5, 5.0, 20, 8);
    let phi = GridFunction::from_fn(kq, gaussian_k).unwrap();
    let xq = Quadrature::trapezoid(0.0, 25.0, 12501);
    let p = one_well();
    let bp = BoundaryPair::dirichlet(1);
    let chk = scattering_operator_check(&p, &bp, &phi, &xq, &opts()).unwrap();
    assert!(chk.defect < 1e-3 * chk.input_norm, "{chk:?}");

    let mut r = rng(21);
    let t = random_invertible(&mut r, 1, 10.0);
    let bpt = transform_bc(&bp, &t, &BcTolerances::default()).unwrap();
    let chk_t = scattering_operator_check(&p, &bpt, &phi, &xq, &opts()).unwrap();
    assert!((chk_t.defect - chk.defect).abs() < 1e-9);
}

#[test]
fn scattering_operator_free_coupled_condition() {
    let mut r = rng(22);
    let bp = random_bc(&mut r, 2);
    let kq = Quadrature::gauss_legendre(0.5, 5.0, 20, 8);
    let phi = GridFunction::from_fn(kq, |k| {
        let g = gaussian_k(k)[0];
        CVec::from_vec(vec![g, g * c(0.0, 0.5)])
    })
    .unwrap();
    let xq = Quadrature::trapezoid(0.0, 25.0, 12501);
    let chk = scattering_operator_check(&PotentialSpec::zero(2), &bp, &phi, &xq, &opts()).unwrap();
    assert!(chk.defect < 1e-6 * chk.input_norm, "{chk:?}");
}

#[test]
fn grid_function_rejects_bad_input() {
    let q = Quadrature { nodes: vec![0.0, 1.0, 0.5], weights: vec![1.0; 3] };
    assert!(GridFunction::new(q, vec![CVec::zeros(1); 3]).is_err());
    let q = Quadrature::trapezoid(0.0, 1.0, 3);
    assert!(GridFunction::new(q.clone(), vec![CVec::zeros(1); 2]).is_err());
    let f = GridFunction::new(q, vec![CVec::zeros(2); 3]).unwrap();
    let r = fourier_apply(&PotentialSpec::zero(1), &BoundaryPair::neumann(1), Sign::Plus, &f, &Quadrature::trapezoid(0.1, 1.0, 3), &opts());
    assert!(matches!(r, Err(TransformError::InvalidArgument(_))));
}

#[test]
fn kernel_csv_has_one_row_per_pair() {
    let k = resolvent_kernel(&PotentialSpec::zero(1), &BoundaryPair::neumann(1), off(-1.0, 0.0), &[0.0, 1.0], &ResolventOptions::default())
        .unwrap();
    let csv = k.to_csv();
    assert_eq!(csv.lines().next().unwrap(), "x,y,re_K_00,im_K_00");
    assert_eq!(csv.lines().count(), 5);
    let _: CMat = k.at(1, 0).clone();
}
