use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    InvalidInput(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("no usable features")]
    NoUsableFeatures,

    #[error("degenerate after filtering: {surviving} class(es) survive min_count {min_count}")]
    DegenerateAfterFiltering { min_count: usize, surviving: usize },

    #[error("class '{class}' has {count} sample(s); stratified splitting needs at least {needed}")]
    ClassTooSmall {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("class {class} has zero samples")]
    ZeroCount { class: usize },

    #[error("length mismatch: {0}")]
    Shape(String),

    #[error("degenerate pairing: all paired differences are zero")]
    DegeneratePairing,

    #[error("non-finite loss at epoch {epoch}, batch {batch} (learning rate {learning_rate:e})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        learning_rate: f64,
    },

    #[error("all {trials} hyperparameter trials were pruned or failed:\n{log}")]
    AllTrialsFailed { trials: usize, log: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
