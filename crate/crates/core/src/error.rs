use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by parsing, validation, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("need at least 2 category columns, found {found}")]
    TooFewLayers { found: usize },

    #[error("row {row}: weight {value:?} is not a positive number")]
    InvalidWeight { row: usize, value: String },

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("solution does not match table: {0}")]
    MismatchedSolution(String),

    #[error("search space {space} exceeds oracle cap {cap}")]
    OracleCapExceeded { space: String, cap: u64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
