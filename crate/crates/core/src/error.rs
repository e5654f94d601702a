use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("invalid catalog: {0}")]
    Validation(String),

    #[error("infeasible margin {margin}: no allowed states for stage {stage}")]
    InfeasibleMargin { stage: usize, margin: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bitstring does not decode to a state of the space")]
    InvalidState,

    #[error("search space has {size} states, above the brute-force cap of {cap}")]
    OverCap { size: u64, cap: u64 },

    #[error("mps error: {0}")]
    Mps(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}
