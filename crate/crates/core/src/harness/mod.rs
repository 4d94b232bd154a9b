//! Config-driven experiment runner: parse a TOML config, run the experiment,
//! write CSVs, field dumps and a checksummed `manifest.json`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::report;
pub use run::{run, RunManifest};
