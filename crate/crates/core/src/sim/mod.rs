//! Timing simulation of synchronous data-parallel iterations.
//!
//! Each worker accumulates `M` micro-batches. With a threshold `τ` a worker
//! is preempted at `min(τ, T_n)`: micro-batches whose cumulative completion
//! time is strictly below `τ` count, the one in flight is discarded.

mod local_sgd;
mod sweep;

pub use local_sgd::{local_sgd_run, LocalSgdConfig, LocalSgdResult, StragglerMode};
pub use sweep::{scale_sweep, ScalePoint, ThresholdPolicy};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::latency::FleetSpec;
use crate::par;
use crate::stats::{stream_id, RngStream};
use crate::threshold::TraceTensor;

const ITERATION_DOMAIN: u64 = 0x6974_6572;
const WARMUP_DOMAIN: u64 = 0x7761_726d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub fleet: FleetSpec,
    pub micro_batches: usize,
    #[serde(default)]
    pub comm_time: f64,
    /// Compute threshold in seconds; `None` runs the baseline.
    #[serde(default)]
    pub tau: Option<f64>,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Stop a preempted worker at its last completed micro-batch instead of at `τ`.
    #[serde(default)]
    pub stop_at_accumulation_boundary: bool,
}

impl SimConfig {
    pub fn new(fleet: FleetSpec, micro_batches: usize, comm_time: f64, iterations: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            fleet,
            micro_batches,
            comm_time,
            tau: None,
            iterations,
            seed,
            stop_at_accumulation_boundary: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_tau(mut self, tau: Option<f64>) -> Self {
        self.tau = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        if self.micro_batches == 0 {
            return Err(invalid("micro_batches must be >= 1"));
        }
        if !(self.comm_time.is_finite() && self.comm_time >= 0.0) {
            return Err(invalid(format!("comm_time must be >= 0, got {}", self.comm_time)));
        }
        if let Some(tau) = self.tau {
            if tau.is_nan() || tau <= 0.0 {
                return Err(invalid(format!("tau must be > 0, got {tau}")));
            }
        }
        if self.iterations == 0 {
            return Err(invalid("iterations must be >= 1"));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.fleet.workers
    }
}

/// Outcome of one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `T_n = Σ_m t_n^{(m)}`.
    pub compute_times: Vec<f64>,
    /// Time each worker joins communication.
    pub stop_times: Vec<f64>,
    /// `M̃_n`.
    pub completed: Vec<usize>,
    pub micro_batches: usize,
    pub comm_time: f64,
}

impl IterationRecord {
    /// `T = max_n T_n`.
    pub fn max_compute(&self) -> f64 {
        self.compute_times.iter().cloned().fold(0.0, f64::max)
    }

    pub fn baseline_step(&self) -> f64 {
        self.max_compute() + self.comm_time
    }

    pub fn drop_step(&self) -> f64 {
        self.stop_times.iter().cloned().fold(0.0, f64::max) + self.comm_time
    }

    /// Mean completed micro-batches over workers.
    pub fn mean_completed(&self) -> f64 {
        self.completed.iter().sum::<usize>() as f64 / self.completed.len() as f64
    }

    /// Per-iteration effective speedup `(T + T_c)/(min(τ, T) + T_c) · M̃/M`.
    pub fn s_eff(&self) -> f64 {
        self.baseline_step() / self.drop_step() * self.mean_completed() / self.micro_batches as f64
    }
}

/// Aggregate over iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub workers: usize,
    pub micro_batches: usize,
    pub iterations: usize,
    pub tau: Option<f64>,
    pub mean_baseline_step: f64,
    pub mean_drop_step: f64,
    /// Mean of `max_n T_n` (excludes communication).
    pub mean_max_compute: f64,
    pub mean_completed: f64,
    pub drop_rate: f64,
    /// Mean per-iteration effective speedup.
    pub s_eff: f64,
    /// Mean per-iteration step-time ratio.
    pub step_speedup: f64,
    /// Micro-batches per second without dropping, `N·M / E[T + T_c]`.
    pub baseline_throughput: f64,
    /// Micro-batches per second with dropping, `N·M̃ / E[min(τ, T) + T_c]`.
    pub drop_throughput: f64,
}

/// Reduce per-iteration records in iteration order.
pub fn summarize(records: &[IterationRecord], tau: Option<f64>) -> RunStats {
    let first = &records[0];
    let (workers, m) = (first.compute_times.len(), first.micro_batches);
    let mut acc = [0.0f64; 6];
    for r in records {
        let base = r.baseline_step();
        let drop = r.drop_step();
        acc[0] += base;
        acc[1] += drop;
        acc[2] += r.max_compute();
        acc[3] += r.mean_completed();
        acc[4] += base / drop * r.mean_completed() / m as f64;
        acc[5] += base / drop;
    }
    let count = records.len() as f64;
    let [base, drop, max_compute, completed, s_eff, step] = acc.map(|a| a / count);
    RunStats {
        workers,
        micro_batches: m,
        iterations: records.len(),
        tau,
        mean_baseline_step: base,
        mean_drop_step: drop,
        mean_max_compute: max_compute,
        mean_completed: completed,
        drop_rate: (1.0 - completed / m as f64).max(0.0),
        s_eff,
        step_speedup: step,
        baseline_throughput: (workers * m) as f64 / base,
        drop_throughput: workers as f64 * completed / drop,
    }
}

/// Evaluate one iteration given its `N x M` latency block (worker-major).
pub fn evaluate_iteration(
    iteration: usize,
    latencies: &[f64],
    micro_batches: usize,
    tau: Option<f64>,
    comm_time: f64,
    stop_at_accumulation_boundary: bool,
) -> IterationRecord {
    let workers = latencies.len() / micro_batches;
    let mut compute_times = Vec::with_capacity(workers);
    let mut stop_times = Vec::with_capacity(workers);
    let mut completed = Vec::with_capacity(workers);
    for row in latencies.chunks_exact(micro_batches) {
        let mut cumulative = 0.0;
        let mut done = 0;
        let mut last_done_at = 0.0;
        for &t in row {
            cumulative += t;
            if tau.is_none_or(|tau| cumulative < tau) {
                done += 1;
                last_done_at = cumulative;
            }
        }
        let stop = match tau {
            None => cumulative,
            Some(_) if done == micro_batches => cumulative,
            Some(_) if stop_at_accumulation_boundary => last_done_at,
            Some(tau) => tau.min(cumulative),
        };
        compute_times.push(cumulative);
        stop_times.push(stop);
        completed.push(done);
    }
    IterationRecord {
        iteration,
        compute_times,
        stop_times,
        completed,
        micro_batches,
        comm_time,
    }
}

fn draw_block(config: &SimConfig, rng: &mut RngStream) -> Vec<f64> {
    let m = config.micro_batches;
    let mut block = Vec::with_capacity(config.workers() * m);
    for n in 0..config.workers() {
        let model = config.fleet.model(n);
        for _ in 0..m {
            block.push(model.micro_batch_time(rng));
        }
    }
    block
}

/// RNG stream owned by iteration `iteration` of a run seeded with `seed`.
pub fn iteration_stream(seed: u64, iteration: usize) -> RngStream {
    RngStream::new(seed, stream_id(&[ITERATION_DOMAIN, iteration as u64]))
}

/// Simulate one iteration, drawing latencies worker by worker from `rng`.
pub fn simulate_iteration(config: &SimConfig, iteration: usize, rng: &mut RngStream) -> IterationRecord {
    let block = draw_block(config, rng);
    evaluate_iteration(
        iteration,
        &block,
        config.micro_batches,
        config.tau,
        config.comm_time,
        config.stop_at_accumulation_boundary,
    )
}

/// All iteration records of a run. Iterations run in parallel, each on its
/// own RNG stream.
pub fn run_records(config: &SimConfig) -> Result<Vec<IterationRecord>> {
    config.validate()?;
    Ok(par::map(config.iterations, |i| {
        let mut rng = iteration_stream(config.seed, i);
        simulate_iteration(config, i, &mut rng)
    }))
}

pub fn run(config: &SimConfig) -> Result<RunStats> {
    Ok(summarize(&run_records(config)?, config.tau))
}

fn trace_from_streams(config: &SimConfig, iterations: usize, stream: impl Fn(usize) -> RngStream + Sync) -> Result<TraceTensor> {
    config.validate()?;
    let blocks = par::map(iterations, |i| draw_block(config, &mut stream(i)));
    TraceTensor::new(
        iterations,
        config.workers(),
        config.micro_batches,
        blocks.concat(),
        vec![config.comm_time; iterations],
    )
}

/// The latencies [`run`] draws for `config`, as a trace.
pub fn sample_trace(config: &SimConfig) -> Result<TraceTensor> {
    trace_from_streams(config, config.iterations, |i| iteration_stream(config.seed, i))
}

/// A warm-up trace on streams disjoint from those used by [`run`].
pub fn warmup_trace(config: &SimConfig, iterations: usize) -> Result<TraceTensor> {
    if iterations == 0 {
        return Err(invalid("warm-up needs at least one iteration"));
    }
    let seed = config.seed;
    trace_from_streams(config, iterations, |i| {
        RngStream::new(seed, stream_id(&[WARMUP_DOMAIN, i as u64]))
    })
}

/// Replay a recorded trace through the simulator at threshold `tau`.
pub fn replay_records(trace: &TraceTensor, tau: Option<f64>, stop_at_accumulation_boundary: bool) -> Vec<IterationRecord> {
    (0..trace.iterations())
        .map(|i| {
            evaluate_iteration(
                i,
                trace.iteration(i),
                trace.micro_batches(),
                tau,
                trace.comm_times()[i],
                stop_at_accumulation_boundary,
            )
        })
        .collect()
}

pub fn replay(trace: &TraceTensor, tau: Option<f64>) -> RunStats {
    summarize(&replay_records(trace, tau, false), tau)
}
