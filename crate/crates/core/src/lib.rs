//! Timing simulator and analysis toolkit for compute-threshold dropping
//! ("DropCompute") in synchronous data-parallel training.
//!
//! * [`stats`]: normal CDF/quantile, seeded RNG streams, empirical CDFs.
//! * [`latency`]: per-micro-batch latency distributions and fleets.
//! * [`sim`]: iteration simulator, scale sweeps and the Local-SGD variant.
//! * [`analytic`]: closed-form step-time and speedup estimators.
//! * [`threshold`]: automatic threshold selection over latency traces.
//! * [`sgd`]: stochastic-batch-size SGD testbed and convergence-bound checks.
//! * [`io`]: trace/result CSV and JSON formats.

pub mod analytic;
#[cfg(feature = "cli")]
pub mod cli;
pub mod error;
pub mod io;
pub mod latency;
pub mod sgd;
pub mod sim;
pub mod stats;
pub mod threshold;

mod par;

pub use error::{Error, Result};
pub use latency::{FleetSpec, NoiseMode, NoiseSpec, WorkerLatencyModel};
pub use sim::{IterationRecord, RunStats, SimConfig};
pub use stats::RngStream;
pub use threshold::{select_threshold, ThresholdSearchResult, TraceTensor};
