use std::path::PathBuf;

/// Errors produced by map construction, training and file emission.
#[derive(Debug, thiserror::Error)]
pub enum VdsomError {
    #[error("invalid grid spec: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("node index {index} out of range for {nodes} nodes")]
    IndexOutOfRange { index: usize, nodes: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("idx parse error at byte {offset}: {message}")]
    IdxParse { offset: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("at step {step}: {message}")]
    Stream { step: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl VdsomError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VdsomError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, VdsomError>;
