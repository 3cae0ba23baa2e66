use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A primitive received inputs whose shapes do not fit its signature.
    #[error("dimension error in `{op}`: got shapes {shapes:?}")]
    Dimension { op: &'static str, shapes: Vec<Vec<usize>> },

    /// A caller violated a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient for parameter `{param}`")]
    Training { param: String },

    #[error("parse error at column {column}: {message}")]
    Parse { column: usize, message: String },

    #[error("ingestion error at line {line}: {message}")]
    Ingest { line: usize, message: String },

    #[error("malformed tree: {0}")]
    Structure(String),

    #[error("tree reconstruction failed at position {position}: {message}")]
    Reconstruction { position: usize, message: String },

    #[error("generation error: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, shapes: &[&[usize]]) -> Self {
        Error::Dimension {
            op,
            shapes: shapes.iter().map(|s| s.to_vec()).collect(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
