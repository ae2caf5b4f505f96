//! Pipeline orchestration for the `ocad` binary: configuration, checkpoints
//! and the `synth`, `train`, `eval` and `report` commands.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;

pub use config::{ModelKind, RunConfig};
pub use error::CliError;
