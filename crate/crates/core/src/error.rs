use thiserror::Error;

/// Errors produced by fitting, sampling, evaluation, and persistence.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data fails validation (non-finite entries, shape mismatch, bad file contents).
    #[error("data validation: {0}")]
    DataValidation(String),

    /// Too few samples for the requested operation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A column (or dataset) has zero spread where positive spread is required.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// A text file could not be parsed; positions are 1-based over data rows.
    #[error("parse error at row {row}, column {col}: {message}")]
    Parse {
        row: usize,
        col: usize,
        message: String,
    },

    /// A group label was requested that the model does not contain.
    #[error("unknown group: {0}")]
    UnknownGroup(String),

    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A numeric routine failed to produce a usable result.
    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
