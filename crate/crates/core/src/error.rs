use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("jet order {requested} exceeds what this field can provide ({available})")]
    JetOrderExceeded { requested: usize, available: i32 },

    #[error("expansion order {requested} exceeds the supported maximum {max}")]
    OrderExceeded { requested: usize, max: usize },

    #[error("field is not declared periodic")]
    NotPeriodic,

    #[error("field period {found} does not match requested period {expected}")]
    PeriodMismatch { expected: f64, found: f64 },

    #[error("field has non-zero time average (|mean| = {mean:e})")]
    NonZeroMean { mean: f64 },

    #[error("exp(T A) differs from the identity by {residual:e}")]
    FramePeriodicityViolation { residual: f64 },

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("maximum number of steps ({max_steps}) exceeded at t = {t}")]
    MaxStepsExceeded { max_steps: usize, t: f64 },

    #[error("non-finite state encountered at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("integration failed: {0}")]
    IntegratorFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimensionMismatch { expected, got }
    }
}
