use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (distribution, geometry, incidence, file contents).
    #[error("validation error: {0}")]
    Validation(String),

    /// A well-formed input outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iteration cap, state-space cap or combinatorial cap was exceeded.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// No scaling guess produced a feasible relaxation.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// An analysis invariant failed at runtime; indicates a bug upstream.
    #[error("internal consistency check failed: {0}")]
    Internal(String),

    #[error("lp subroutine failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
