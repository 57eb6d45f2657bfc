//! Config-driven runner behind the `omit-cool` binary.

pub mod config;
pub mod run;

pub use config::{parse, RunConfig};
pub use run::{run, write_artifacts, Outcome, RunError};
