//! Scenario-file front end for the `qcorr` library.

pub mod commands;
pub mod error;
pub mod file;

pub use commands::{run, Cli};
pub use error::CliError;
pub use file::{parse_scenario, Loaded, ScenarioFile};
