use std::path::PathBuf;

use crate::trace::RunTrace;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("jump schedule must contain at least one event")]
    EmptySchedule,

    #[error("jump schedule has {available} events but {required} iterations were requested")]
    ScheduleTooShort { required: usize, available: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("jump times must satisfy T_k < T_(k+1), got {t_k} and {t_next}")]
    NonIncreasingTimes { t_k: f64, t_next: f64 },

    #[error("sample index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("second-moment matrix is rank deficient (smallest eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },

    #[error("no sampled point has f(w) - f(w*) above the threshold {threshold:e}")]
    InsufficientSample { threshold: f64 },

    #[error("grid is empty after applying the L > mu constraint")]
    EmptyGrid,

    #[error("iterate diverged at iteration {iteration}")]
    Diverged {
        iteration: usize,
        /// Last finite primary iterate.
        last_w: Vec<f64>,
        /// Trace recorded up to the abort.
        trace: Box<RunTrace>,
    },

    #[error("malformed problem file {path}: {reason}")]
    MalformedProblem { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
