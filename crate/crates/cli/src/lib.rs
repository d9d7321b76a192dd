//! Batch runner for ensemble broadcast control: TOML configs in, CSV, JSON
//! and SVG artifacts out.

pub mod config;
pub mod error;
pub mod format;
pub mod runner;
pub mod svg;

pub use config::{load_config, parse_config, Overrides, RunConfig};
pub use error::CliError;
pub use runner::{compare, run, Mode, Status};
