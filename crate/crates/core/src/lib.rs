//! Learning reduced-order quadratic control systems from harmonic transfer
//! function samples.
//!
//! The pipeline fits a linear model to first-harmonic samples with the
//! Loewner framework and then infers the quadratic operator from second- and
//! third-harmonic samples, either in one least-squares step or by a coupled
//! fixed-point iteration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod loewner;
pub mod simulation;
pub mod system;

pub use error::{Error, Result};
pub use system::QuadraticSystem;
