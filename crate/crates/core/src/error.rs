use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("dimension overflow: {0}")]
    DimensionOverflow(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid phantom model: {0}")]
    Phantom(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("loss became non-finite at step {step} (lr = {lr})")]
    NonFiniteLoss { step: usize, lr: f64 },

    #[error("evaluation set overlaps training volumes: {0:?}")]
    Leakage(Vec<String>),

    #[error("calcified voxel {0:?} cannot be covered by any clamped patch mask")]
    Uncoverable([usize; 3]),

    #[error("stenosis measurement failed: {0}")]
    Measurement(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
