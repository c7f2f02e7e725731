use thiserror::Error;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A factorization met a singular value (or R diagonal) below the floor.
    #[error("rank deficiency in {context}: value {value:e} at index {index} is below floor {floor:e}")]
    RankDeficient {
        context: &'static str,
        index: usize,
        value: f64,
        floor: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("linear system is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// A time step failed; `step` is the index of the state it started from.
    #[error("step {step} (t = {time}) failed: {cause}")]
    StepFailed { step: usize, time: f64, cause: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
