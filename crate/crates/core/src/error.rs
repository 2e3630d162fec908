use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no documents")]
    NoDocuments,
    #[error("document {0} is empty")]
    EmptyDocument(String),
    #[error("unknown term id {term} (vocabulary size {vocab})")]
    UnknownTerm { term: usize, vocab: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("{0} undefined (zero denominator)")]
    Undefined(&'static str),
    #[error("covariance matrix is singular: {0}")]
    SingularCovariance(String),
    #[error("metric failed on {failed} of {total} bootstrap resamples")]
    Bootstrap { failed: usize, total: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for input and precondition errors; false for failures that
    /// happen while computing on valid input.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::ConstantColumn(_)
                | Error::Undefined(_)
                | Error::SingularCovariance(_)
                | Error::Bootstrap { .. }
                | Error::Numerical(_)
        )
    }
}
