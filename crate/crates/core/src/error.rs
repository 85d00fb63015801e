use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    RaggedRow {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: row {row}, column {column}: cannot parse {cell:?} as a number")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        cell: String,
    },

    #[error("every scenario was dropped during cleaning ({dropped} removed)")]
    EmptySet { dropped: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("sampling interval mismatch: {0} h vs {1} h")]
    DtMismatch(f64, f64),

    #[error("scenario length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
