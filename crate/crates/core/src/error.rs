use thiserror::Error;

/// Errors produced by the operators, solvers and integrators in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("operator {0} is not diagonal on the sine basis; use the periodic route or the bounded-grid route")]
    UnsupportedBasis(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("field has mean {mean:.3e}, exceeding gauge tolerance {tol:.1e}")]
    Gauge { mean: f64, tol: f64 },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64, target: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, got })
    }
}
