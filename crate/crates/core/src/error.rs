use thiserror::Error;

/// Errors raised by descriptor construction, kernels and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("numeric failure in mode {mode}: {message}")]
    NumericFailure { mode: usize, message: String },

    /// Malformed input; `line` is 1-based for line-oriented formats.
    #[error("format error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<usize>, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
