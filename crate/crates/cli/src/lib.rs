//! Batch front end for `nskrig`: one mode per invocation, configured by a TOML
//! file and command-line overrides.

pub mod args;
pub mod config;
pub mod error;
pub mod run;

pub use args::Args;
pub use config::{Mode, RunConfig};
pub use error::CliError;
