//! Experiment driver for the marl-core runtime: configuration files, metrics
//! CSV and run summaries, throughput comparisons and learning curves.

pub mod compare;
pub mod config;
pub mod driver;
mod error;
pub mod metrics;

pub use compare::{throughput_compare, CompareSpec, CompareTable};
pub use config::{topology_banner, ExperimentConfig};
pub use driver::{learning_curve_eval, run_experiment, Outcome, RunSummary};
pub use error::BenchError;
pub use metrics::{MetricsRow, CSV_HEADER};
