use thiserror::Error;

/// Errors raised by flow evaluation, shift calculus and recovery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("outside the domain of the flow: {0}")]
    OutOfDomain(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("map is not a shift along the flow: {0}")]
    NotAShift(String),

    #[error("map is not a shift along the regular extension: {0}")]
    NotARegularExtensionShift(String),

    #[error("target is not on the local orbit: {0}")]
    NotOnLocalOrbit(String),

    #[error("map is not invertible: {0}")]
    NonInvertible(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("no consistent branch: {0}")]
    Branch(String),

    #[error("z = {z} and h(z) = {hz} lie on different trajectories")]
    SignMismatch { z: f64, hz: f64 },

    #[error("singular finite-difference stencil: {0}")]
    SingularStencil(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
