use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation and benchmarking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("backward requires a scalar root, got shape {0:?}")]
    NonScalarRoot((usize, usize)),
    #[error("gradient reversal scale must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("non-finite gradient for parameter `{0}`; optimizer step aborted")]
    NonFiniteGradient(String),
    #[error("invalid estimator spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("{path}:{line}: {msg}")]
    Data {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("missing data file {0}")]
    MissingFile(PathBuf),
    #[error("no completed runs to aggregate ({diverged} diverged)")]
    NoCompletedRuns { diverged: usize },
    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
