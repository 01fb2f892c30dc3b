use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline, from terrain synthesis to benchmarking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("position ({x:.3}, {y:.3}) is outside the map")]
    OutOfBounds { x: f64, y: f64 },
    #[error("map generation failed: {0}")]
    Generation(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("planning failed: {0}")]
    Planning(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("malformed archive: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors the CLI reports with exit code 1.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Usage(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
