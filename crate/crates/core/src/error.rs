use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Input violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),

    /// A numeric routine failed to reach its accuracy target.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Operands with incompatible shapes.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl LabError {
    pub fn validation(msg: impl Into<String>) -> Self {
        LabError::Validation(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        LabError::Numeric(msg.into())
    }
}
