use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("basis size C({n}+{d}, {n}) overflows the platform integer width")]
    BasisOverflow { n: usize, d: usize },

    #[error("basis size {size} exceeds the configured cap {cap}")]
    BasisTooLarge { size: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("observation set contains no samples")]
    EmptyObservations,

    #[error("non-finite value at variable {row}, sample {col}")]
    NonFinite { row: usize, col: usize },

    #[error("moment matrix has numerical rank 0")]
    SingularMoment,

    #[error("moment matrix has non-finite entries; monomials overflowed at degree {0}")]
    NonFiniteMoments(usize),

    #[error("KKT system is singular; the moment matrix is degenerate")]
    DegenerateKkt,

    #[error("eta must lie in [0, 1], got {0}")]
    InvalidEta(f64),

    #[error("covariance is rank deficient: numerical rank {rank} of {n}")]
    RankDeficient { rank: usize, n: usize },

    #[error("too few retained samples: {retained} kept, at least {required} required")]
    TooFewRetained { retained: usize, required: usize },

    #[error("invalid mixture specification: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
