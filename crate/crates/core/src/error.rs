//! Crate-wide error type.

use thiserror::Error;

/// All fallible operations in this crate return [`Result`].
pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by dataset handling, training, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path}: {message}")]
    Csv { path: String, message: String },

    #[error("{context}: expected {expected} values, got {got}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dataset has no rows")]
    EmptyDataset,

    #[error("label column {column:?} has {distinct} distinct values; exactly 2 required")]
    LabelCardinality { column: String, distinct: usize },

    #[error("non-numeric value {value:?} in column {column:?} at row {row}")]
    NonNumericCell {
        column: String,
        row: usize,
        value: String,
    },

    #[error("missing value in column {column:?} at row {row}")]
    MissingValue { column: String, row: usize },

    #[error("unknown column {column:?}")]
    UnknownColumn { column: String },

    #[error("column {column:?} has {distinct} distinct values; exactly 2 required for grouping")]
    GroupCardinality { column: String, distinct: usize },

    #[error("weights must be finite, non-negative, and not all zero")]
    InvalidWeights,

    #[error("feature matrix contains a non-finite value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("domain pair mismatch: {message}")]
    DomainMismatch { message: String },

    #[error("invalid parameter {name}: {message}")]
    InvalidParam { name: &'static str, message: String },

    #[error("training data contains a single class; both labels are required")]
    SingleClass,

    #[error("need at least {needed} rows for {context}, got {got}")]
    TooFewRows {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("k-fold requires k in [2, positive-weight rows]; k={k}, usable rows={usable}")]
    BadFold { k: usize, usable: usize },

    #[error("ambiguity kind {kind} is not supported by {operation}")]
    UnsupportedKind {
        kind: &'static str,
        operation: &'static str,
    },

    #[error("{what} produced {count} groups; at most {max} supported")]
    TooManyGroups {
        what: &'static str,
        count: usize,
        max: usize,
    },

    #[error("numeric failure in {context}: {message}")]
    Numeric {
        context: &'static str,
        message: String,
    },

    #[error("design matrix error: {message}")]
    Design { message: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            message: message.into(),
        }
    }
}
