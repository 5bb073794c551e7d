//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("cannot parse {value:?} as a number at row {row}, column {column}")]
    Parse {
        value: String,
        row: usize,
        column: String,
    },

    #[error("column selector error: {0}")]
    Selector(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("column {0:?} has zero variance")]
    DegenerateColumn(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("all ridge grid points were numerically singular for leave-one-out")]
    LoocvAllSkipped,

    #[error("degenerate residual products: zero standard deviation")]
    DegenerateResiduals,

    #[error("quantile bracketing failed: {0}")]
    Quantile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
