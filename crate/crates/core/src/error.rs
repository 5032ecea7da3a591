use thiserror::Error;

/// Errors raised by the model, detectors and harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The Gram matrix `A A^H` (or a Fisher matrix) could not be inverted.
    #[error("singular system: {what} (condition number {condition:e})")]
    Singular { what: &'static str, condition: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Exhaustive search refused because the candidate set is too large.
    #[error("search budget exceeded: {required} candidates required, cap is {cap}")]
    Budget { required: f64, cap: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular { .. } | Error::Numerical(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
