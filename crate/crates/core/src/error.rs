use std::path::PathBuf;

/// Errors produced anywhere in the condensation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient samples: {0}")]
    Insufficient(String),

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("non-finite loss at epoch {epoch}: {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("workload too large: estimated {estimate} alignment operations exceeds limit {limit}")]
    TooLarge { estimate: u128, limit: u128 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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
