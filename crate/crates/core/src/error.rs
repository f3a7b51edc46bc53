use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size mismatch: {0}")]
    Mismatch(String),

    #[error("time step {dt} exceeds the explicit drift bound {bound}")]
    Stability { dt: f64, bound: f64 },

    #[error("field value {value} at node {node} left the admissible band (t = {time})")]
    OutOfRange { node: usize, value: f64, time: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Gram matrix is singular beyond the ridge regularization (pivot {pivot:e} at row {row})")]
    SingularGram { row: usize, pivot: f64 },

    #[error("test function does not vanish at the boundary (|G| = {0:e})")]
    BoundaryTrace(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

pub(crate) fn mismatch<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Mismatch(msg.into()))
}
