use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain of the operation (e.g. θ outside [−π/2, π/2]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Caller-supplied arguments violate a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two inputs that must be aligned have different lengths.
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// A ball or box query found no points to work with.
    #[error("empty region: {0}")]
    EmptyRegion(String),

    /// Neighbourhood too degenerate to estimate a surface frame.
    #[error("degenerate neighborhood at point {index}")]
    DegenerateNeighborhood { index: usize },

    /// Selection over an empty candidate list.
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input data (files, values) rather than API misuse.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Io { .. }
                | Error::EmptyRegion(_)
                | Error::DegenerateNeighborhood { .. }
                | Error::Empty(_)
        )
    }
}
