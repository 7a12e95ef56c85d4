use std::fmt;

/// Errors raised by the laboratory.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("size budget exceeded: {what} needs {needed}, budget is {budget}")]
    Budget {
        what: &'static str,
        needed: usize,
        budget: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(
        "operator is not non-negative at this discretization: min eigenvalue {min_eig:e} below -{tol:e}"
    )]
    NotNonNegative { min_eig: f64, tol: f64 },
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("not converged under refinement: {0}")]
    Refinement(String),
    #[error("multiplier undefined at spectral point {0}")]
    Undefined(f64),
    #[error("resolvent pole: z^2 + lambda = 0 at lambda = {0}")]
    Pole(f64),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cache file: {0}")]
    Cache(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl fmt::Display) -> Error {
    Error::InvalidArgument(msg.to_string())
}
