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
    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    UnparseableCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: unknown label {label:?}")]
    UnknownLabel { row: usize, label: String },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("dataset has no negative samples")]
    NoNegatives,
    #[error("requested {requested} samples from a dataset of {available}")]
    SubsampleTooLarge { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("covariance of component {0} is not positive definite")]
    DegenerateCovariance(usize),
    #[error("gini impurity undefined for all-zero counts")]
    ZeroCounts,
    #[error("solver produced a zero weight vector")]
    DegenerateBoundary,
    #[error("exhaustive search supports at most {cap} positives, dataset has {n_p}")]
    OracleTooLarge { n_p: usize, cap: usize },
    #[error("rule parse error on line {line}: {message}")]
    RuleParse { line: usize, message: String },
    #[error("model format error: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
