use std::path::PathBuf;

/// Errors produced across the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("anchor class {class} has fewer than two members; no positive can be drawn")]
    UnsatisfiablePositive { class: usize },

    #[error("no sample outside anchor class {class}; no negative can be drawn")]
    UnsatisfiableNegative { class: usize },

    #[error("instance of {n} nodes exceeds the exhaustive limit of {limit}")]
    SizeLimit { n: usize, limit: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate projection: {0}")]
    DegenerateProjection(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("corrupt record {record} in {path}: label byte {label}")]
    CorruptRecord {
        path: PathBuf,
        record: usize,
        label: u8,
    },

    #[error("dataset generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
