use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {message}")]
    Numeric { message: String },

    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn numeric(message: impl Into<String>) -> Self {
        Error::Numeric {
            message: message.into(),
        }
    }

    /// True for failures of an iterative or numerical routine, as opposed to
    /// bad input. The CLI maps these to exit code 1.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric { .. } | Error::Fit(_))
    }
}
