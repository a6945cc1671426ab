//! Command-line front end: JSON configuration, reports and trajectory export.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{Loaded, SystemConfig};
pub use error::{CliError, CliResult};
