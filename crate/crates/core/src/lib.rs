//! Randomly pivoted Cholesky (RPCholesky) for low-rank approximation of
//! positive-semidefinite matrices, with pivoting baselines, a column Nyström
//! approximation toolkit, and downstream kernel ridge regression and spectral
//! clustering.
//!
//! Matrices are accessed through an [`EntryOracle`], which counts every entry
//! it evaluates. The main entry points are [`rpcholesky`] and
//! [`rpcholesky_blocked`]; [`PivotStrategy`] dispatches to any pivoting rule.

pub mod apps;
pub mod baselines;
mod error;
pub mod experiment;
pub mod factor;
pub mod generators;
pub mod linalg;
pub mod model_io;
pub mod oracle;
pub mod rng;
pub mod rpcholesky;
pub mod strategy;
pub mod verify;

pub use baselines::{diagonal_pivots, greedy_pivots, rls_pivots, uniform_pivots, RlsScores};
pub use error::{Error, Result};
pub use factor::{factorize_pivots, NystromFactor, PivotTrace, StopRule};
pub use oracle::{Dataset, EntryOracle, KernelFamily, KernelSpec};
pub use rng::{stream_rng, StreamRng};
pub use rpcholesky::{
    nystrom_from_pivots, partial_cholesky_naive, rpcholesky, rpcholesky_blocked, rpcholesky_naive,
    NaiveRun,
};
pub use strategy::PivotStrategy;
