//! Federated multivariate statistical process control.
//!
//! Fits PCA/MPCA process-monitoring models across vertically partitioned data
//! held by multiple parties without revealing any party's raw data or
//! loadings block, then performs federated fault detection (T², Q) and
//! privacy-preserving per-party fault diagnosis, including online scoring of
//! incomplete batches.

pub mod batch;
pub mod data;
pub mod eval;
pub mod model;
pub mod numerics;
pub mod protocol;
pub mod transport;
