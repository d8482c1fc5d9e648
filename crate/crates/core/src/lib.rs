// Validation rejects NaN through negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod env;
pub mod error;
pub mod grid;
pub mod harness;
pub mod maze;
pub mod nets;
pub mod oracle;
pub mod par;
pub mod potentials;

pub use error::{Error, Result};
