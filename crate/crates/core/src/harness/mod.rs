//! Data generation, contraction-rate studies, configuration and output files.

pub mod commands;
pub mod config;
pub mod data;
pub mod output;
pub mod study;

pub use commands::{run, Command};
pub use config::{Aggregate, ExperimentConfig, Scenario};
pub use data::{generate_classification, generate_density_sample, generate_regression, regression_design};
pub use output::emit_results;
pub use study::{rate_study, run_rate_study, RateStudyResult, ReplicateRecord};
