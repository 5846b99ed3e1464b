//! Declarative experiment runner over the built-in problem catalog.

pub mod catalog;
pub mod config;
pub mod error;
pub mod run;

pub use catalog::{catalog_list, problems};
pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use error::CliError;
pub use run::{run, RunOutcome, Status};
