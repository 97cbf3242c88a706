//! Chunked I/O for large delimited files.
//!
//! `chunkio` streams a file as record-aligned [`Chunk`]s, parses each chunk
//! into a typed columnar [`Frame`] or a [`DenseMatrix`] with bulk separator
//! scans, writes frames and matrices back as delimited text, and drives
//! per-chunk work sequentially or in parallel with [`chunk_apply`].
//!
//! The [`ols`] module fits linear models out of core: each chunk contributes
//! its `XᵀX` and `Xᵀy`, the pieces are summed, and the normal equations are
//! solved with a rank-revealing pivoted Cholesky factorization.
//!
//! ```
//! use chunkio::{parse_frame, ColumnType, Schema};
//!
//! let schema = Schema::new(vec![ColumnType::Integer, ColumnType::Character]).unwrap();
//! let parsed = parse_frame(b"1,a\n2,b\n", &schema, 0).unwrap();
//! assert_eq!(parsed.frame.n_rows(), 2);
//! ```
//!
//! Runnable examples for each capability live in this crate's `examples/`
//! directory; the `chunkio` binary exposes `parse`, `mm`, `fit` and `bench`.

pub mod bench;
pub mod chunk_apply;
pub mod chunker;
pub mod cli;
pub mod error;
pub mod frame;
pub mod matrix;
pub mod model_matrix;
pub mod ols;
pub mod writer;

pub use chunk_apply::{chunk_apply, iter_chunks, ApplyConfig, Mode, Source};
pub use chunker::{byte_range_splits, Chunk, Chunker, ChunkerConfig};
pub use error::{Error, Result};
pub use frame::{
    infer_schema, parse_field, parse_frame, parse_frame_with_header, Column, ColumnData,
    ColumnType, Frame, Parsed, ParseStats, Schema, Value,
};
pub use matrix::{parse_matrix, DenseMatrix, MatrixOptions};
pub use model_matrix::{expand, normalize_hhmm, Term, TermSpec};
pub use ols::{solve_ne, NormalEqAccumulator, RegressionFit};
pub use writer::{append_to_checkpoint, format_frame, format_matrix, FormatOptions};
