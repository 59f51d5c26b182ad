//! Double-shrinkage estimation for sparse high-dimensional linear regression.
//!
//! A LASSO fit (overfitted, keeps strong and weak signals) and an adaptive
//! LASSO fit (underfitted, keeps strong signals) are combined through a
//! Stein-type weight statistic `W_n` and a bounded shrink function `r`.
//! The crate also ships the Monte Carlo grid, the bootstrap prediction-error
//! harness and orthonormal-design conformance checks used to evaluate them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evaluation;
mod linalg;
pub mod pipeline;
pub mod shrinkage;
pub mod simulation;
pub mod solvers;
pub mod theory;

pub use error::{Error, Result};
pub use linalg::{pairwise_mean, pairwise_sum};
