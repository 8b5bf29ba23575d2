//! Generalized Forchheimer flow in bounded well–reservoir domains: kernels,
//! meshes, pseudo-steady profiles, transient liquid and gas solvers, and
//! productivity-index diagnostics.

// NaN-rejecting checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diag;
pub mod error;
pub mod expr;
pub mod fv;
pub mod gas;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod program;
pub mod pss;
pub mod quadrature;
pub mod transient;

pub use error::{Error, Result};
