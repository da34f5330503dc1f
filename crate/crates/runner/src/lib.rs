//! Experiment orchestration: builds probe sets for each experiment, queries
//! models through the gateway, aggregates source preference, runs the
//! statistical tests and writes reports.

pub mod catalog;
pub mod config;
pub mod data;
pub mod error;
pub mod execute;
pub mod export;
pub mod hierarchy;

pub use catalog::{Builder, Contrast, Experiment, Matchup, ProbeSet, Setting};
pub use config::RunConfig;
pub use data::{load_inputs, Inputs};
pub use error::{Result, RunnerError};
pub use execute::{build_gateways, execute, run_experiment, Evaluation};
pub use hierarchy::{induce_hierarchy, Hierarchy, ModelBallot};
