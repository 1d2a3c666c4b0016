//! Library surface of the CLI: config parsing, exports and the batch
//! harness, kept separate from the binary so integration tests can drive
//! them in-process.

pub mod batch;
pub mod config;
pub mod output;

pub use config::{RunConfig, ScenarioList};
