//! File formats, synthetic fixtures, configuration and the command-line
//! pipeline around `selfsample-core`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod formats;
pub mod pipeline;

pub use error::{CliError, CliResult};
