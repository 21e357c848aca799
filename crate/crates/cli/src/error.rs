use std::path::Path;

use thiserror::Error;

/// Failures surfaced by the pipeline and CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file; `line` is 1-based (0 when unknown).
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] spca_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn format(path: &Path, line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }

    pub fn file(path: &Path, message: impl Into<String>) -> Self {
        Error::File {
            path: path.display().to_string(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for unreadable/malformed inputs, 3 for numerical
    /// failures, 4 for infeasible requests.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format { .. } | Error::File { .. } | Error::Io(_) => 2,
            Error::Core(e) if e.is_numerical() => 3,
            Error::Core(_) => 4,
            Error::Usage(_) => 4,
        }
    }
}
