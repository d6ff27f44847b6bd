use thiserror::Error;

/// Errors raised by grid construction, the oracles and the solvers.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    /// A linear or nonlinear solve did not converge. `trace` holds the
    /// residual history, one entry per iteration.
    #[error("solver failure: {message} (after {} iterations)", trace.len())]
    SolverFailure { message: String, trace: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
