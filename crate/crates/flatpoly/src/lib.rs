//! JSON configs, CSV traces and the subcommands behind the `flatpoly` binary.

pub mod commands;
pub mod config;
mod error;
pub mod output;

pub use commands::{SolverChoice, POLYTOPE_TOL};
pub use config::{ModelConfig, ScenarioConfig};
pub use error::CliError;
