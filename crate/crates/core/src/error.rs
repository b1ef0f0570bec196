use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes are incompatible for the requested operation.
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A layer or model was configured inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    /// The API was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data is degenerate or otherwise unusable.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// A feature bundle failed validation; `modality` names the offending stream.
    #[error("validation error in {modality}: {reason}")]
    Validation { modality: String, reason: String },

    #[error("training data error: {0}")]
    TrainingData(String),

    /// A gradient or parameter contained NaN or infinity.
    #[error("non-finite gradient for parameter `{param}` at element {index}")]
    NonFinite { param: String, index: usize },

    /// A tensor file header is malformed.
    #[error("format error at byte offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    /// A tensor file payload does not match its header.
    #[error("corrupt tensor file: expected {expected} payload bytes, found {actual}")]
    Corrupt { expected: usize, actual: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image error on {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    /// A checkpoint does not match the model or data it is used with.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn dim(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(modality: &str, reason: impl Into<String>) -> Self {
        Error::Validation {
            modality: modality.to_string(),
            reason: reason.into(),
        }
    }
}
