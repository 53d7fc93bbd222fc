use thiserror::Error;

/// Errors produced by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site count {0} outside supported range 1..={max}", max = crate::spinspace::MAX_SITES)]
    SiteCount(usize),

    #[error("pattern length {found} does not match chain length {expected}")]
    PatternLength { expected: usize, found: usize },

    #[error("invalid pattern character {0:?} (expected '0' or '1')")]
    PatternChar(char),

    #[error("basis index {index} out of range for {n} sites")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("magnetization sector mz={mz} is empty for {n} sites")]
    EmptySector { n: usize, mz: i64 },

    #[error("site {site} invalid for a chain of {n} sites")]
    InvalidSite { site: usize, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coupling file line {line}: {message}")]
    CouplingFormat { line: usize, message: String },

    #[error("coupling matrix is not symmetric: |J[{a}][{b}] - J[{b}][{a}]| = {deviation:e}")]
    Asymmetric { a: usize, b: usize, deviation: f64 },

    #[error("dimension {dim} exceeds the dense-diagonalization limit {limit}")]
    ResourceGuard { dim: usize, limit: usize },

    #[error("need at least {needed} levels, found {found}")]
    TooFewLevels { needed: usize, found: usize },

    #[error("generalized imbalance is undefined for a fully polarized pattern")]
    UndefinedImbalance,

    #[error("no samples inside window [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
