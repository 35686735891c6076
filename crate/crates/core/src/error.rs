use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("table is not rectangular: row {row} has {got} cells, expected {expected}")]
    NonRectangular {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("negative response code {code} at row {row}, item {item}")]
    NegativeCode { row: usize, item: usize, code: i64 },
    #[error("response code {code} at row {row}, item {item} is outside cardinality {cardinality}")]
    CodeOutOfRange {
        row: usize,
        item: usize,
        code: i64,
        cardinality: u32,
    },
    #[error("cell at row {row}, item {item} is not an integer: {cell:?}")]
    InvalidCell {
        row: usize,
        item: usize,
        cell: String,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid domain structure: {0}")]
    StructureInvalid(String),
    #[error("item set is empty")]
    EmptySet,
    #[error("pattern id {pattern} out of range for {count} patterns")]
    PatternOutOfRange { pattern: u64, count: u64 },
    #[error("partition uses {used} domains but only {available} slots are available")]
    TooManyDomains { used: usize, available: usize },
    #[error("domain sizes sum to {got}, expected {expected}")]
    SizesDontSumToJ { got: usize, expected: usize },
    #[error("need {needed} distinct rows to seed {needed} classes, found {found}")]
    TooFewDistinctRows { needed: usize, found: usize },
    #[error("no valid domain proposal exists from the current structure")]
    NoValidProposal,
    #[error("every class assigns zero mass to the observed response")]
    AllClassesZeroMass,
    #[error("need at least two chains with equal lengths of at least 10")]
    TooFewChains,
    #[error("log-likelihood matrix is empty")]
    EmptyMatrix,
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
