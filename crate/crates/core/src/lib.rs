//! Stationary scattering theory for the matrix Schrödinger operator `−ψ'' + Vψ` on the half line
//! with a general self-adjoint vertex condition at the origin.
//!
//! The crate is organised bottom-up:
//!
//! * [`bc`] validates boundary pairs `(A, B)` and computes their diagonal normal form.
//! * [`potential`] represents compactly supported Hermitian matrix potentials.
//! * [`solutions`] integrates Jost, regular and physical solutions.
//! * [`scattering`] assembles Jost and scattering matrices and their high-energy model.
//! * [`spectral`] finds bound states and evaluates the spectral shift function.
//! * [`transforms`] provides resolvent kernels, generalized Fourier maps and wave operators.

pub mod bc;
pub mod linalg;
pub mod ode;
pub mod potential;
pub mod quad;
pub mod scattering;
pub mod solutions;
pub mod spectral;
pub mod transforms;

mod error;

pub use error::Error;
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64 as C64;

/// Shortest round-trip decimal form of a float, switching to exponent notation for very large or
/// very small magnitudes. Negative zero prints as `0`.
pub fn fmt_float(x: f64) -> String {
    let x = x + 0.0;
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
