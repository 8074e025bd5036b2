use std::path::PathBuf;

/// Errors produced by the texture retrieval pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported image format in {}: {reason}", path.display())]
    ImageFormat { path: PathBuf, reason: String },

    /// Malformed text file; `line` is 1-based.
    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("incompatible feature vectors: {0}")]
    Incompatible(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("comparison error: {0}")]
    Comparison(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(line: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
