use thiserror::Error;

/// Errors produced by the spectral toolkit and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {what} needs {requested} elements, cap is {cap}")]
    ResourceLimit {
        what: &'static str,
        requested: usize,
        cap: usize,
    },

    #[error("undersized grid: eigenvalue cap {band} needs {required} points per axis, grid has {actual}")]
    UndersizedGrid {
        band: usize,
        required: usize,
        actual: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symbol is not finite at multi-index {index:?} (value {value})")]
    NumericDomain { index: Vec<u32>, value: f64 },

    #[error("t-grid covers [{actual_lo}, {actual_hi}] but [{required_lo}, {required_hi}] is required")]
    Coverage {
        required_lo: f64,
        required_hi: f64,
        actual_lo: f64,
        actual_hi: f64,
    },

    #[error("sample grid step {step} does not resolve the symbol; need step <= {required}")]
    Unresolved { step: f64, required: f64 },

    #[error("unsupported case: {0}")]
    UnsupportedCase(String),

    #[error("ratio undefined: {0}")]
    UndefinedRatio(&'static str),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
