use std::path::PathBuf;

/// Errors produced anywhere in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: {dim} mismatch (expected {expected}, got {got})")]
    ShapeMismatch {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("gradient tape: {0}")]
    Tape(String),

    #[error("non-finite gradient in parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("non-finite loss at iteration {iter}: {loss}")]
    NonFiniteLoss { iter: usize, loss: f32 },

    #[error("weight archive: {msg} (at byte offset {offset})")]
    Archive { offset: usize, msg: String },

    #[error("layer `{name}`: expected shape {expected:?}, archive has {found:?}")]
    LayerShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("png {path}: {msg}")]
    Png { path: PathBuf, msg: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Error {
    Error::InvalidArgument {
        op,
        msg: msg.into(),
    }
}
