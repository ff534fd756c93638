use thiserror::Error;

use crate::bc::BcError;
use crate::potential::PotentialError;
use crate::scattering::ScatteringError;
use crate::solutions::SolutionError;
use crate::spectral::SpectralError;
use crate::transforms::TransformError;

/// Any error raised by the library, tagged by originating module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Solution(#[from] SolutionError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

impl Error {
    /// Name of the originating module.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Bc(_) => "bc",
            Error::Potential(_) => "potential",
            Error::Solution(_) => "solutions",
            Error::Scattering(_) => "scattering",
            Error::Spectral(_) => "spectral",
            Error::Transform(_) => "transforms",
        }
    }

    /// Name of the specific error variant, e.g. `SingularJost`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Bc(e) => e.name(),
            Error::Potential(e) => e.name(),
            Error::Solution(e) => e.name(),
            Error::Scattering(e) => e.name(),
            Error::Spectral(e) => e.name(),
            Error::Transform(e) => e.name(),
        }
    }

    /// Module where the failure arose, looking through wrapping layers.
    pub fn origin(&self) -> &'static str {
        fn scattering(e: &ScatteringError) -> &'static str {
            match e {
                ScatteringError::Solution(_) => "solutions",
                ScatteringError::Bc(_) => "bc",
                _ => "scattering",
            }
        }
        match self {
            Error::Scattering(e) => scattering(e),
            Error::Spectral(SpectralError::Scattering(e)) => scattering(e),
            Error::Transform(TransformError::Scattering(e)) => scattering(e),
            Error::Transform(TransformError::Spectral(SpectralError::Scattering(e))) => scattering(e),
            Error::Transform(TransformError::Spectral(_)) => "spectral",
            other => other.module(),
        }
    }
}
