use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the scoring, selection, simulation and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A JSONL/CSV line could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A record violates one of the record invariants.
    #[error("record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },

    /// Bad configuration value (beta, alpha, missing reference log-probs, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Bad argument to an operation (k out of range, y == y', ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    /// An update left the exact-update lattice of a policy state.
    #[error(
        "parameter overflow at context {context}: |theta| exceeded the exact-update range {limit}"
    )]
    LatticeOverflow { context: usize, limit: f64 },

    /// The Dist double sum and the 2V identity disagreed beyond tolerance.
    #[error("audit mismatch at step {step}: direct {direct}, via variance {via_variance}")]
    AuditMismatch {
        step: u64,
        direct: f64,
        via_variance: f64,
    },

    /// A pipeline stage failed.
    #[error("iteration {iteration}, stage {stage}: {source}")]
    Stage {
        iteration: usize,
        stage: String,
        #[source]
        source: Box<Error>,
    },

    /// A file required by a stage is missing or malformed.
    #[error("stage {stage}: {path}: {message}")]
    File {
        stage: String,
        path: PathBuf,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(id: &str, reason: impl Into<String>) -> Self {
        Error::InvalidRecord {
            id: id.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by input data rather than usage or environment.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::InvalidRecord { .. }
            | Error::EmptyDataset
            | Error::DuplicateId(_)
            | Error::File { .. }
            | Error::Json(_)
            | Error::Csv(_) => true,
            Error::Stage { source, .. } => source.is_data_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
