//! Config-driven experiment runner for the strongdamp laboratory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod level;
pub mod manifest;

pub use config::{Damping, Experiment, ExperimentConfig};
pub use error::RunError;
pub use experiments::{run, run_all, Outcome};
pub use manifest::{compare_refinements, Comparison, RunManifest};
