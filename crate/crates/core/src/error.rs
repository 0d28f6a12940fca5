use std::path::PathBuf;

/// Errors raised anywhere in the evaluation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition (shapes, ids, ranges).
    #[error("validation error: {0}")]
    Validation(String),

    /// Too few samples for the requested statistic.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below threshold {threshold:e}")]
    NotPsd { eigenvalue: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Malformed binary or text file; `offset` is a byte offset for binary
    /// formats and 0 when not applicable.
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    /// JSON document did not match the expected layout.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    /// Misuse of the class-wise protocol, e.g. a starred metric against a
    /// comparison set that may contain target-class objects.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("extractor backend error ({}): {message}", path.display())]
    Backend { path: PathBuf, message: String },

    #[error("scene {scene}: {message}")]
    Generation { scene: u64, message: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
