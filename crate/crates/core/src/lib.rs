//! Large-scale sparse principal component analysis.
//!
//! The crate computes sparse principal components of a covariance matrix in
//! three stages:
//!
//! 1. **Screening** ([`screening`]): per-feature variances are computed in a
//!    single streaming pass, and every feature whose variance is at most the
//!    sparsity penalty `lambda` is discarded. The discard is *safe*: such a
//!    feature cannot appear in the support of any optimal solution of the
//!    cardinality-penalized problem, so the reduced problem has the same
//!    optimum as the full one.
//! 2. **Solving** ([`solver`]): the l1-penalized semidefinite relaxation is
//!    solved on the reduced covariance by block coordinate ascent over
//!    row/column pairs of a log-det-penalized reformulation. Each row update
//!    costs `O(n^2)`, one sweep `O(n^3)`.
//! 3. **Extraction** ([`solver::extract_component`]): the leading eigenvector
//!    of the normalized solution gives the sparse loading vector, its support
//!    and explained variance.
//!
//! [`covariance`] builds reduced covariance matrices from streamed document
//! collections and generates synthetic test models; [`oracle`] holds
//! small-instance brute-force references used to validate the solver.
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature to use it in such environments. All randomized constructions
//! take explicit seeds and are bit-reproducible.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod fmath;

pub mod covariance;
pub mod mat;
pub mod oracle;
pub mod rng;
pub mod screening;
pub mod solver;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
