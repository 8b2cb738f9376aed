use thiserror::Error;

use crate::graph::GraphError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(#[from] GraphError),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("empty class `{0}`")]
    EmptyClass(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bad morphism: {0}")]
    BadMorphism(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("distortion removed every base node after {0} attempts")]
    DistortionExhausted(usize),

    #[error("dataset format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
