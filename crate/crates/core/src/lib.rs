//! Scalar-on-function ridge regression with the coefficient function shrunk
//! toward a data-driven template made of a few rectangles.
//!
//! The model is `y = β₀ + ∫ x(t) β(t) dt + ε` with curves sampled on an
//! equispaced grid. [`fitter::fit_dataset`] selects the number of rectangles
//! and the penalty weight by cross-validation; [`benchmark`] compares the
//! result with plain ridge, a roughness penalty and minimum-norm least
//! squares.

// `!(a < b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod fitter;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod ridge;
pub mod seeding;
pub mod simgen;
pub mod template;

pub use error::{AatrError, Result};
