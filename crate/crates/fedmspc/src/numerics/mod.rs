//! Deterministic dense linear algebra and statistical quantile kernels.
//!
//! Everything here is a pure function of its inputs (plus an explicit seed);
//! values are immutable after construction and safe to share across threads.

mod matrix;
pub mod random;
pub mod stats;
mod svd;

pub use matrix::{abs_correlation, column_stats, DataMatrix};
pub use random::{
    generate_invertible, generate_orthogonal, haar_orthogonal, invertible_from_rng,
    OrthogonalMatrix, DEFAULT_COND_MAX,
};
pub use stats::{f_cdf, f_quantile, normal_cdf, normal_quantile};
pub use svd::{svd, SvdResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}
