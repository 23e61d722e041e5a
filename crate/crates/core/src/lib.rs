//! Out-of-core sparse general matrix-matrix multiplication (SpGEMM).
//!
//! Operands live on disk in a block store and are multiplied under an
//! explicit memory budget. The pieces, bottom up:
//!
//! * [`matrix`]: in-memory rows and matrices, the row-wise product, and a
//!   dense reference multiplication used as a test oracle.
//! * [`store`]: the fixed-size block file format and its object index table.
//! * [`buffer`]: splitting the memory budget between the input and output
//!   buffers, the shared block cache for the right operand, and I/O counters.
//! * [`engine`]: block-based work allocation over threads, per-row partial
//!   aggregation, spilling of overflowing output, and the final merge.
//! * [`rmat`]: the recursive-matrix synthetic graph generator.
//! * [`io`]: Matrix Market and edge-list ingestion and export.
//! * [`verify`], [`bench`], [`cli`]: oracles for stored results, the sweep
//!   harness, and the command-line driver.

pub mod bench;
pub mod buffer;
pub mod cli;
pub mod engine;
pub mod error;
pub mod io;
pub mod matrix;
pub mod rmat;
pub mod size;
pub mod store;
pub mod verify;

pub use engine::{multiply, EngineConfig, MultiplyReport};
pub use error::{Error, Result};
pub use matrix::{SparseMatrix, SparseRow};
pub use store::StoredMatrix;
