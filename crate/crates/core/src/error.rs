use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// An event lies outside the stream resolution or breaks time ordering.
    #[error("event {index}: {message}")]
    InvalidEvent { index: usize, message: String },

    #[error("missing key: {0}")]
    MissingKey(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("sampling too coarse: pixel (x={x}, y={y}) changes by {delta:.3} log units in one step (limit {limit:.3})")]
    SamplingTooCoarse { x: usize, y: usize, delta: f64, limit: f64 },

    #[error("non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
