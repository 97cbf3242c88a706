use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Boxed cause carried by [`Error::WorkerFailure`].
pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("read failed: {0}")]
    Read(#[from] io::Error),

    #[error("record starting at byte {offset} exceeds the {limit}-byte hard cap")]
    RecordTooLarge { offset: u64, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("header has {found} fields, schema declares {expected}")]
    HeaderArityMismatch { expected: usize, found: usize },

    #[error("sample record {record} has {found} fields, expected {expected}")]
    RaggedSample {
        record: usize,
        expected: usize,
        found: usize,
    },

    #[error("record {record} has {found} fields, expected {expected}")]
    RaggedInput {
        record: usize,
        expected: usize,
        found: usize,
    },

    #[error("strict mode: {0}")]
    Strict(String),

    #[error("cell at row {row}, column {column:?} contains the field separator or a newline")]
    SeparatorCollision { row: usize, column: String },

    #[error("write failed: {0}")]
    Write(io::Error),

    #[error("column {0:?} not found")]
    MissingColumn(String),

    #[error("value {value:?} in factor column {column:?} is not a declared level")]
    UnknownLevel { column: String, value: String },

    #[error("clock value {0} is outside 0..=9999")]
    OutOfRange(i64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design has rank 0; nothing to solve")]
    DegenerateSystem,

    #[error("chunk {seq} failed: {cause}")]
    WorkerFailure { seq: u64, cause: BoxError },

    #[error("workers-read mode needs a seekable file, got a stream")]
    NotSeekable,
}
