use std::path::PathBuf;

use thiserror::Error;

/// All failures surfaced by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("analyzer: {0}")]
    Analyzer(String),

    #[error("index: {0}")]
    Index(String),

    #[error("config: {0}")]
    Config(String),

    #[error("judgments: {0}")]
    Judgments(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("tuner: {0}")]
    Tuner(String),

    #[error("evaluation failed for query {query:?} at location {location:?}: {message}")]
    Evaluation {
        query: String,
        location: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 1 for usage errors, 2 for data errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
