//! Configuration, orchestration and file output for the `starkmbl` binary.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run_command, run_sweep, Context};
pub use config::{Command, RunConfig};
pub use error::CliError;
