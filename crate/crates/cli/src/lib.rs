//! Disk-facing half of the sparse PCA pipeline: streaming bag-of-words
//! ingestion, cache file formats, pipeline orchestration and reporting.
//!
//! The numerical kernels live in `spca-core`; this crate feeds them from
//! UCI-format `docword` files without ever holding a corpus in memory,
//! caches the expensive artifacts (per-feature statistics, parsed triples)
//! keyed by corpus content hash, and drives the screen/solve/deflate loop
//! behind the `spca` binary.

mod error;

pub mod corpus;
pub mod matrix_io;
pub mod pipeline;
pub mod stats_io;
pub mod synthgen;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
