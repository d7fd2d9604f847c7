//! Config-driven experiments on spectral shift functions.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Command, Context};
pub use config::{load_config, parse_config, ExperimentConfig, Resolved};
pub use error::CliError;
