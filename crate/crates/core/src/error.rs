use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("entry ({i}, {j}) lies outside the {m}x{p} grid")]
    IndexOutOfRange { i: usize, j: usize, m: usize, p: usize },

    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid truncation interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("current state lies outside the truncation box at coordinate {coord}")]
    OutsideBox { coord: usize },

    #[error("precision matrix is not positive semidefinite: {0}")]
    NotPositiveDefinite(String),

    #[error("lambda = {lambda} is outside (0, n/w) = (0, {limit})")]
    LambdaOutOfRange { lambda: f64, limit: f64 },

    #[error("n = {n} is smaller than max(m, p) = {required}")]
    TooFewObservations { n: usize, required: usize },

    #[error("series 2 requires m >= 50, got m = {0}")]
    SeriesTwoDimension(usize),

    #[error("autocorrelation is undefined for a zero-variance series")]
    ZeroVariance,

    #[error("series too short: length {len}, need more than {need}")]
    SeriesTooShort { len: usize, need: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
