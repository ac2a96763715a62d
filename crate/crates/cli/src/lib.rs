//! Command-line driver for the trade-shock experiments: configuration,
//! per-year orchestration and CSV/SVG report emission.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Command, RunManifest, RunOutcome, YearFailure};
pub use config::{ConfigArgs, RunConfig, YearRange};
