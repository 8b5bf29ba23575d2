//! Scenario-driven front end for the `forch-core` solvers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod run;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use run::{execute, resolve, Command, Overrides};
pub use scenario::Scenario;
