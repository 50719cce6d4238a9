use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    /// A serving link whose estimate carries no energy cannot be MR-normalized.
    #[error("degenerate link {0}: zero estimate energy with positive data power")]
    DegenerateLink(String),

    #[error("drop {drop_index} failed during {stage}: {source}")]
    Drop {
        drop_index: u64,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// True for errors caused by user input rather than by the computation.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Json(_) => true,
            Error::Drop { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
