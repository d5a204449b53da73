use thiserror::Error;

/// Errors raised by the scheduling library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A symmetric factorization failed. `block` names the pivot block of a
    /// block recursion, when there is one.
    #[error("matrix is not positive definite{}", .block.map(|b| format!(" (pivot block {b})")).unwrap_or_default())]
    NotPositiveDefinite { block: Option<usize> },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    /// The prior does not carry the representation an operation needs.
    #[error("prior is stored in the wrong form: {0}")]
    WrongForm(&'static str),

    /// A computed marginal gain was negative beyond numerical noise.
    #[error("entropy oracle inconsistency: marginal gain {gain:e} at step {step}")]
    OracleInconsistency { step: usize, gain: f64 },

    #[error("enumeration of {count} schedules exceeds the cap of {cap}")]
    TooLarge { count: u128, cap: u128 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn not_pd() -> Self {
        Error::NotPositiveDefinite { block: None }
    }
}
