//! Benchmarking toolkit for continuous black-box optimizers.
//!
//! * [`suite`]: BBOB-style noiseless test functions with seeded instances.
//! * [`optim`]: ask/tell optimizers, boundary handling and the algorithm registry.
//! * [`runner`]: experiment configuration and parallel, resumable execution.
//! * [`datastore`]: append-only run records and IOH-style CSV export.
//! * [`metrics`]: AOCC, fixed-budget precision, rankings and baseline comparisons.
//! * [`portfolio`]: portfolio values, marginal contributions and Shapley estimates.

pub mod datastore;
pub mod metrics;
pub mod mix;
pub mod optim;
pub mod portfolio;
pub mod runner;
pub mod suite;

pub use datastore::{Event, RecordStore, RunRecord, RunStatus, Trajectory};
pub use metrics::{aocc, AoccBounds, PerformanceTable};
pub use optim::{list_portfolio, run_algorithm, AlgorithmSpec, Registry};
pub use runner::{run_experiment, ExperimentConfig, RunKey};
pub use suite::{make_instance, FunctionId, ProblemInstance};
