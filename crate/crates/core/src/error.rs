use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// A malformed record. `row` is the 1-based data row (the header is row 0).
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("transaction database has no transactions")]
    EmptyDatabase,

    #[error("non-finite value in column {column:?} at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("item universe of {items} exceeds the brute-force cap of {cap}")]
    ItemUniverseTooLarge { items: usize, cap: usize },

    #[error("frequent itemset list is not support-closed: {itemset:?} lacks subset {missing:?}")]
    NotSupportClosed {
        itemset: Vec<usize>,
        missing: Vec<usize>,
    },

    #[error("items {first} and {second} share column {column:?}")]
    ColumnConflict {
        column: String,
        first: usize,
        second: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("non-finite embedding value at row {row}, column {col}")]
    Value { row: usize, col: usize },

    #[error("too few rows: need at least {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rule antecedent {antecedent:?} never occurs in the data")]
    UndefinedRule { antecedent: Vec<usize> },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
