//! Solver and solution-set topology toolkit for monotone vector variational
//! inequalities over the nonnegative orthant ordering.
//!
//! The pipeline is: build a [`problem::VviProblem`], sample its basic
//! multifunction over a simplex lattice with [`sweep::sweep`], split the
//! resulting point cloud into components with [`topology`], and cross-check
//! the hypotheses with [`analysis`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod sweep;
pub mod topology;
pub mod vi;

pub use error::{ParseError, Result, VviError};
