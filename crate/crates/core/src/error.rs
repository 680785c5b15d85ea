use thiserror::Error;

/// Errors raised by the quantization, MOM and oracle routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("infeasible confidence: {ell} blocks requested but only {n} observations available")]
    InfeasibleBlocks { ell: usize, n: usize },

    #[error("median of means needs an odd number of blocks, got {0}")]
    EvenBlocks(usize),

    #[error("quantile level {alpha} gives an integer rank l*alpha with {ell} blocks")]
    IntegerQuantileRank { alpha: f64, ell: usize },

    #[error("length mismatch: partition covers {needed} values but {found} were given")]
    LengthMismatch { needed: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("exact oracle is 1-D only (got dimension {0})")]
    NotOneDimensional(usize),

    #[error("oracle inconsistency: estimated quantizer beats the optimum by {0}")]
    OracleInconsistent(f64),

    #[error("spec file: {0}")]
    SpecFile(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::SpecFile(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
