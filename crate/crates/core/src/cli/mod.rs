//! Configuration and subcommands behind the `pwilm` binary.

pub mod commands;
pub mod config;

pub use commands::{exit_code, run, Command, Outcome};
pub use config::RunConfig;
