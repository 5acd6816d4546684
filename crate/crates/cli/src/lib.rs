//! Command-line layer: configuration files, run directories, CLM2 snapshots
//! and the `simulate`, `steady`, `verify` and `sweep` subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod snapshot;
pub mod verify;

pub use error::{CliError, CliResult};
