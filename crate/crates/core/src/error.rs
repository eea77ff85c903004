use thiserror::Error;

/// Errors raised by the laboratory's numerical operations.
#[derive(Debug, Error)]
pub enum PamError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solution exceeded the blow-up cap {cap:e} at t = {time}")]
    BlowUp { time: f64, cap: f64 },

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("eigensolver did not converge after {iterations} iterations (max residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PamError>;

pub(crate) fn invalid(msg: impl Into<String>) -> PamError {
    PamError::InvalidInput(msg.into())
}
