use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("iterate diverged at step {step}; last finite iterate is w_{last_finite}")]
    Diverged { step: usize, last_finite: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("staleness trace is empty")]
    EmptyTrace,

    #[error("staleness trace has {available} writes but {needed} steps were requested")]
    TraceTooShort { needed: usize, available: usize },

    #[error("polynomial has degree 0 and no roots")]
    DegreeZero,

    #[error("{0} writes do not fit the trace index type")]
    TooManyWrites(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by parameters outside their valid range.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_) | Error::Dimension { .. })
    }
}
