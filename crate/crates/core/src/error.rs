use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("degenerate matrix: {0}")]
    DegenerateMatrix(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("singular kernel: {0}")]
    SingularKernel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("dataset is empty after {0}")]
    EmptyDataset(String),
    #[error("user {0} has interacted with every item; no negatives available")]
    NoNegativesAvailable(usize),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for this error class: 2 for I/O, 3 for data and
    /// numerical problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 3,
        }
    }
}
