use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot open {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: bad header line {line:?} (expected `<count> <dim>`)")]
    BadHeader { path: PathBuf, line: String },

    #[error("{0}")]
    Parse(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("word not in vocabulary: {0:?}")]
    UnknownWord(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular normal matrix; use a positive ridge lambda")]
    Singular,

    #[error("training diverged: {0}")]
    NonFinite(String),
}

impl Error {
    /// Short machine-readable category for command-line error lines.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadHeader { .. } | Error::Parse(_) => "format",
            Error::DimensionMismatch { .. } => "dimension",
            Error::Degenerate(_) => "degenerate",
            Error::UnknownWord(_) => "unknown-word",
            Error::EmptyDataset(_) => "empty-dataset",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Singular => "singular",
            Error::NonFinite(_) => "non-finite",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
