//! Configuration, dispatch and CSV export behind the `iabrate` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, write_outputs, Command, Manifest, Outcome, Table};
pub use config::{load_config, parse_config, CaseName, ModeName, RunConfig, StrategyName};
pub use error::CliError;
