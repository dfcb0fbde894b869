//! # permlab-core
//!
//! Exact and asymptotic permanents of block-uniform matrices.
//!
//! An (mn)×(mn) matrix that is constant on each n×n block is determined by an
//! m×m seed `B`. Its permanent can be computed exactly by summing over m×m
//! contingency tables (the block-occupancy pattern of a permutation), and its
//! large-n behaviour is predicted by the Sinkhorn scaling of `B` together with
//! a Gaussian fluctuation determinant.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | dense matrices, LU determinant, Jacobi eigensolver |
//! | [`logmath`] | log-domain scalars, `log_sum_exp`, `log_factorial` |
//! | [`scaling`] | Sinkhorn matrix scaling with a fixed gauge |
//! | [`permanent`] | block expansion, naive and Ryser permanents |
//! | [`tables`] | contingency-table enumeration and the exact block sum |
//! | [`asymptotics`] | leading term, fluctuation determinant, sweeps |
//! | [`fluctuations`] | the Gaussian fluctuation apparatus and its identities |
//! | [`kernel`] | Nyström discretization of smooth cost kernels |
//!
//! ```rust
//! use permlab_core::{asymptotics, scaling, tables, PositiveBlockMatrix};
//!
//! let b = PositiveBlockMatrix::from_rows(vec![vec![0.75, 0.25], vec![0.25, 0.75]]).unwrap();
//! let exact = tables::block_permanent_ratio(&b, 50).unwrap();
//! let sol = scaling::sinkhorn_scale(&b, 1e-12, 100_000).unwrap();
//! let pred = asymptotics::predict_ratio(&b, 50, &sol).unwrap();
//! assert!((exact.log_ratio - pred.log_predicted_ratio).abs() < 1e-2);
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod error;
pub mod fluctuations;
pub mod kernel;
pub mod linalg;
pub mod logmath;
pub mod permanent;
pub mod scaling;
pub mod tables;

mod parallel;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use logmath::LogNonneg;
pub use scaling::{PositiveBlockMatrix, ScalingSolution};
