//! Crate-wide error type for data-dependent and I/O failures.
//!
//! Shape violations and other programming errors panic instead; see the
//! module docs on [`crate::tape`].

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset size must be even, got {0}")]
    OddDatasetSize(usize),

    #[error("circles factor must lie in (0, 1), got {0}")]
    BadCirclesFactor(f64),

    #[error("train fraction must lie in (0, 1), got {0}")]
    BadTrainFraction(f64),

    #[error("split would leave class {0} empty")]
    EmptyClassAfterSplit(usize),

    #[error("sinkhorn produced a non-finite assignment entry")]
    SinkhornOverflow,

    #[error("SGLD produced a non-finite state at step {step} (chain row {row})")]
    SgldDiverged { step: usize, row: usize },

    #[error("DAM produced a non-finite state at move {step} (row {row})")]
    DamDiverged { step: usize, row: usize },

    #[error("training diverged at iteration {iteration}: {source}")]
    TrainingDiverged {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed {what}: {detail}")]
    Format { path: PathBuf, what: &'static str, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format { path: path.into(), what, detail: detail.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
