//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be positive, got {0}")]
    ZeroDimension(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cannot bundle an empty set of vectors")]
    EmptyBundle,

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("input length {got} does not match expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },

    #[error("node index {node} out of range for graph with {nodes} nodes")]
    NodeOutOfRange { node: u32, nodes: usize },

    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },

    #[error("match pool has no donors in arm {arm}")]
    EmptyArm { arm: u8 },

    #[error("split is degenerate: {reason}")]
    DegenerateSplit { reason: String },

    #[error("treatment assignment left an outcome arm empty after {attempts} attempts")]
    DegenerateTreatment { attempts: u32 },

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error("malformed {what} at {path}: {reason}")]
    MalformedFile {
        what: String,
        path: String,
        reason: String,
    },

    #[error("refusing to overwrite {0} without force")]
    AlreadyExists(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
