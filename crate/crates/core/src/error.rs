use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("step {t} out of range 1..={max}")]
    Step { t: usize, max: usize },

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("channel error: {0}")]
    Channel(String),

    #[error("image {height}x{width} is smaller than the {window}x{window} window")]
    Size {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    #[error("incompatible {what}: model expects {expected}, got {actual}")]
    Compatibility {
        what: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite value at step {t}: l1={l1} l2={l2} l3={l3}")]
    Numeric { t: usize, l1: f64, l2: f64, l3: f64 },

    #[error("unsupported image format: {0}")]
    Format(String),

    #[error("unpaired references for: {}", .0.join(", "))]
    Pairing(Vec<String>),

    #[error("model error: {0}")]
    Model(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn load(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Load {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
