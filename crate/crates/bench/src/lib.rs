//! Monte Carlo harness, correspondence I/O and reports for the `cecme`
//! estimator. The `cecme` binary wraps these modules.

pub mod config;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod monte_carlo;
pub mod report;

pub use config::{Experiment, OutputFormat, RunConfig};
pub use error::{BenchError, Result};
pub use monte_carlo::{run_monte_carlo, run_monte_carlo_with_threads, run_sweep_value, MetricSeries, TrialRecord};
