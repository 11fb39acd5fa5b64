use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("no interactions left after filtering")]
    EmptyDataset,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("item `{item}` has zero variance and cannot be standardized")]
    ZeroVariance { item: String },

    #[error("cannot merge Gram matrices: {0}")]
    IncompatibleGram(String),

    #[error("regularized Gram matrix is not positive definite (pivot {pivot:e} at item {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("item index {index} out of range for {n_items} items")]
    ItemOutOfRange { index: usize, n_items: usize },

    #[error("item vocabulary mismatch (expected {expected}, found {found})")]
    VocabMismatch { expected: String, found: String },

    #[error("user `{user}`: {source}")]
    User {
        user: String,
        #[source]
        source: Box<Error>,
    },

    #[error("held-out set is empty")]
    EmptyHeldOut,

    #[error("no users could be evaluated")]
    NoEvaluableUsers,

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
