//! Command-line front end for `optomech`: configuration parsing, subcommand
//! dispatch and reproducible CSV output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command};
pub use config::{parse_config, ConfigError, RunConfig, ScanConfig};
pub use error::CliError;
