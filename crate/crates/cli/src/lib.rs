//! Command-line front end for the pointwise stabilization toolkit: strict
//! run configurations, the `synthesize`, `simulate`, `control` and
//! `observability` commands, and their CSV/JSON/matrix outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, run, Command, Report};
pub use config::RunConfig;
pub use error::CliError;
