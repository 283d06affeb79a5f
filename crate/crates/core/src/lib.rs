#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod association;
pub mod cli_io;
pub mod conditional_law;
pub mod error;
pub mod model_reduction;
pub mod plausibility;
pub mod quadrature;
pub mod sim_harness;

pub use error::{Error, Result};
