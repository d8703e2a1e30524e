//! Mini-slot MAC scheduling toolkit: traffic generation, analytic
//! estimators, greedy assignment, slot-level simulation and a learned
//! parameter selector.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod assigner;
pub mod cli;
pub mod config;
pub mod datastore;
pub mod error;
pub mod experiments;
pub mod scenario;
pub mod sim;
pub mod surrogate;
pub mod traffic;
pub mod types;

pub use error::{Error, Result};
pub use types::*;
