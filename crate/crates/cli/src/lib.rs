//! Configuration parsing and task runners behind the `emscat` binary.

pub mod config;
pub mod run;

pub use config::{emit_config, parse_config, RunConfig, SchemaError, Task};
pub use run::{config_digest, run, RunError, RunOptions, RunSummary};
