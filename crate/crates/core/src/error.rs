use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "eigensolver did not converge on cluster {cluster} (size {size}): residual {residual:e} > {tolerance:e}"
    )]
    EigenNonConvergence {
        cluster: usize,
        size: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("matrix is ill-conditioned: condition estimate {estimate:e} exceeds cap {cap:e}")]
    IllConditioned { estimate: f64, cap: f64 },

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("test function cannot be evaluated: {0}")]
    NotEvaluable(String),
}

impl Error {
    /// True for failures caused by numerics rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenNonConvergence { .. }
                | Error::IllConditioned { .. }
                | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
