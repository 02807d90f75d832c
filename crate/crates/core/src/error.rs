use thiserror::Error;

/// Errors raised by the simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singularity at tau = {tau}: {reason}")]
    Singularity { tau: f64, reason: String },

    #[error("step size underflow at tau = {tau} (h = {h:e})")]
    StepUnderflow { tau: f64, h: f64 },

    #[error("step budget of {max_steps} exhausted at tau = {tau}")]
    TooManySteps { tau: f64, max_steps: usize },

    #[error("basis error: {0}")]
    Basis(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors that are detected before any output is produced.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
