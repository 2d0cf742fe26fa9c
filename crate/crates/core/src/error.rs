use std::path::PathBuf;

use thiserror::Error;

use crate::imaging::Axis;

/// Projection curve captured when segmentation fails, for offline inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveDump {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub minima: Vec<usize>,
}

impl std::fmt::Display for CurveDump {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} curve ({} samples), minima at {:?}; values:", self.axis, self.values.len(), self.minima)?;
        for v in &self.values {
            write!(f, " {v:.4}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode image {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("unsupported image format in {path}: {message}")]
    UnsupportedFormat { path: PathBuf, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("segmentation failed: {reason}\n{dump}")]
    Segmentation { reason: String, dump: Box<CurveDump> },

    #[error("classification failed: {0}")]
    Classification(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unknown model key: {0}")]
    UnknownKey(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("defect out of bounds: {0}")]
    OutOfBounds(String),

    #[error("generator check failed: {0}")]
    Generator(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
