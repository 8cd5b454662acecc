use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed configuration: {0}")]
    Config(String),

    #[error("duplicate request id `{0}`")]
    DuplicateId(String),

    #[error("corpus has no requests; epoch is undefined")]
    EmptyCorpus,

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty vocabulary: no term survived filtering")]
    EmptyVocabulary,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at iteration {iteration} of {stage}")]
    NonFinite { stage: &'static str, iteration: usize },

    #[error("labels contain a single class")]
    SingleClass,

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("timestamp {created_at} precedes community epoch {epoch}")]
    BeforeEpoch { created_at: i64, epoch: i64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
