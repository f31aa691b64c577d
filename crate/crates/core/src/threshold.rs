//! Decentralized automatic threshold selection.
//!
//! Every worker holds the same synchronized latency trace and evaluates the
//! mean per-iteration effective speedup over a list of candidate thresholds;
//! since the search is a deterministic function of shared data, all workers
//! agree on `τ*` without further communication.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Micro-batch latencies `t[i][n][m]` and per-iteration communication times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceTensor {
    iterations: usize,
    workers: usize,
    micro_batches: usize,
    /// Row-major `[iteration][worker][micro_batch]`.
    latencies: Vec<f64>,
    comm_times: Vec<f64>,
}

impl TraceTensor {
    pub fn new(
        iterations: usize,
        workers: usize,
        micro_batches: usize,
        latencies: Vec<f64>,
        comm_times: Vec<f64>,
    ) -> Result<Self> {
        if iterations == 0 || workers == 0 || micro_batches == 0 {
            return Err(Error::Trace("trace dimensions must all be >= 1".into()));
        }
        if latencies.len() != iterations * workers * micro_batches {
            return Err(Error::Trace(format!(
                "expected {} latencies for {iterations}x{workers}x{micro_batches}, got {}",
                iterations * workers * micro_batches,
                latencies.len()
            )));
        }
        if comm_times.len() != iterations {
            return Err(Error::Trace(format!(
                "expected {iterations} communication times, got {}",
                comm_times.len()
            )));
        }
        if let Some(bad) = latencies.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::Trace(format!("latencies must be positive and finite, got {bad}")));
        }
        if let Some(bad) = comm_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::Trace(format!("communication times must be >= 0, got {bad}")));
        }
        Ok(Self {
            iterations,
            workers,
            micro_batches,
            latencies,
            comm_times,
        })
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn micro_batches(&self) -> usize {
        self.micro_batches
    }

    pub fn latencies(&self) -> &[f64] {
        &self.latencies
    }

    pub fn comm_times(&self) -> &[f64] {
        &self.comm_times
    }

    #[inline]
    pub fn latency(&self, iteration: usize, worker: usize, micro_batch: usize) -> f64 {
        self.latencies[(iteration * self.workers + worker) * self.micro_batches + micro_batch]
    }

    /// The `N x M` block of one iteration.
    pub fn iteration(&self, iteration: usize) -> &[f64] {
        let stride = self.workers * self.micro_batches;
        &self.latencies[iteration * stride..(iteration + 1) * stride]
    }

    /// Copy with the worker axis reordered: new worker `k` is old worker `perm[k]`.
    pub fn permute_workers(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.workers];
        if perm.len() != self.workers || perm.iter().any(|&p| p >= self.workers || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidParameter("not a permutation of the worker axis".into()));
        }
        let mut lat = Vec::with_capacity(self.latencies.len());
        for i in 0..self.iterations {
            for &p in perm {
                let start = (i * self.workers + p) * self.micro_batches;
                lat.extend_from_slice(&self.latencies[start..start + self.micro_batches]);
            }
        }
        Self::new(self.iterations, self.workers, self.micro_batches, lat, self.comm_times.clone())
    }

    /// Per-(iteration, worker) compute times `T_{i,n} = Σ_m t[i][n][m]`.
    pub fn worker_compute_times(&self) -> Vec<f64> {
        self.latencies
            .chunks_exact(self.micro_batches)
            .map(|row| row.iter().fold(0.0, |acc, t| acc + t))
            .collect()
    }

    /// Slowest-worker compute time of each iteration.
    pub fn max_compute_times(&self) -> Vec<f64> {
        self.worker_compute_times()
            .chunks_exact(self.workers)
            .map(|ts| ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// One point of the threshold curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    /// Mean per-iteration effective speedup.
    pub s_eff: f64,
    /// Mean fraction of micro-batches dropped.
    pub drop_rate: f64,
    /// Mean per-iteration step-time ratio, ignoring drops.
    pub step_speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSearchResult {
    pub tau_star: f64,
    pub s_eff_star: f64,
    pub curve: Vec<CurvePoint>,
}

impl ThresholdSearchResult {
    pub fn grid(&self) -> Vec<f64> {
        self.curve.iter().map(|p| p.tau).collect()
    }
}

// Per-iteration data reused across every candidate threshold.
struct IterationSummary {
    sorted_cumulative: Vec<f64>,
    max_compute: f64,
    comm: f64,
}

fn summarize(trace: &TraceTensor) -> Vec<IterationSummary> {
    let (n_workers, m) = (trace.workers, trace.micro_batches);
    (0..trace.iterations)
        .map(|i| {
            let block = trace.iteration(i);
            let mut cumulative = Vec::with_capacity(n_workers * m);
            let mut max_compute = 0.0f64;
            for row in block.chunks_exact(m) {
                let mut acc = 0.0;
                for &t in row {
                    acc += t;
                    cumulative.push(acc);
                }
                max_compute = max_compute.max(acc);
            }
            cumulative.sort_by(f64::total_cmp);
            IterationSummary {
                sorted_cumulative: cumulative,
                max_compute,
                comm: trace.comm_times[i],
            }
        })
        .collect()
}

fn evaluate(summaries: &[IterationSummary], workers: usize, micro_batches: usize, tau: f64) -> CurvePoint {
    let m = micro_batches as f64;
    let (mut s_sum, mut completed_sum, mut step_sum) = (0.0, 0.0, 0.0);
    for it in summaries {
        let completed = it.sorted_cumulative.partition_point(|&c| c < tau) as f64 / workers as f64;
        let step = (it.max_compute + it.comm) / (tau.min(it.max_compute) + it.comm);
        s_sum += step * completed / m;
        completed_sum += completed;
        step_sum += step;
    }
    let count = summaries.len() as f64;
    CurvePoint {
        tau,
        s_eff: s_sum / count,
        drop_rate: 1.0 - completed_sum / count / m,
        step_speedup: step_sum / count,
    }
}

/// Effective-speedup curve over `grid` and the maximising threshold.
///
/// Per iteration `i`: `T_i = max_n Σ_m t`, `M̃_i(τ)` is the mean number of
/// micro-batches whose cumulative time is strictly below `τ`, and
/// `S_i(τ) = (T_i + T_c,i)/(min(τ, T_i) + T_c,i) · M̃_i/M`. `S_eff` averages
/// `S_i` over iterations. Ties resolve to the largest `τ`.
///
/// Non-positive and non-finite grid entries are discarded; the remaining grid
/// is sorted and deduplicated. When `grid` is `None`, [`default_grid`] is used.
pub fn select_threshold(trace: &TraceTensor, grid: Option<&[f64]>) -> Result<ThresholdSearchResult> {
    let mut taus: Vec<f64> = match grid {
        Some(g) => g.iter().copied().filter(|t| t.is_finite() && *t > 0.0).collect(),
        None => default_grid(trace),
    };
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    if taus.is_empty() {
        return Err(Error::InvalidParameter("threshold grid is empty after filtering".into()));
    }
    let summaries = summarize(trace);
    let curve = par::map(taus.len(), |k| evaluate(&summaries, trace.workers, trace.micro_batches, taus[k]));
    let mut best = 0;
    for (k, p) in curve.iter().enumerate() {
        if p.s_eff >= curve[best].s_eff {
            best = k;
        }
    }
    Ok(ThresholdSearchResult {
        tau_star: curve[best].tau,
        s_eff_star: curve[best].s_eff,
        curve,
    })
}

/// Number of quantile levels drawn from each pooled sample set in [`default_grid`].
pub const DEFAULT_GRID_LEVELS: usize = 128;

/// Candidate thresholds derived from the trace.
///
/// Union of [`DEFAULT_GRID_LEVELS`] quantiles of the pooled cumulative
/// micro-batch completion times and as many quantiles of the per-worker step
/// compute times (where the optimum lives), plus an anchor just above the
/// slowest iteration so the no-drop case `S_eff = 1` is always a candidate.
/// Since completion counts use a strict `<`, `S_eff` jumps up right after each
/// sample value, so every candidate is the next float above its quantile.
/// Quantiles are order statistics, so the grid is invariant under worker
/// permutations. At most `2·DEFAULT_GRID_LEVELS + 1` points.
pub fn default_grid(trace: &TraceTensor) -> Vec<f64> {
    let mut cumulative = Vec::with_capacity(trace.latencies.len());
    for row in trace.latencies.chunks_exact(trace.micro_batches) {
        let mut acc = 0.0;
        for &t in row {
            acc += t;
            cumulative.push(acc);
        }
    }
    let mut totals = trace.worker_compute_times();
    cumulative.sort_by(f64::total_cmp);
    totals.sort_by(f64::total_cmp);
    let quantile = |xs: &[f64], k: usize| {
        let idx = ((k as f64 / DEFAULT_GRID_LEVELS as f64) * xs.len() as f64).ceil() as usize;
        xs[idx.clamp(1, xs.len()) - 1]
    };
    let mut grid = Vec::with_capacity(2 * DEFAULT_GRID_LEVELS + 1);
    for k in 1..=DEFAULT_GRID_LEVELS {
        grid.push(quantile(&cumulative, k).next_up());
        grid.push(quantile(&totals, k).next_up());
    }
    grid.push(totals.last().copied().unwrap_or(0.0).next_up());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Outcome of running the selector independently on every worker's copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusReport {
    pub tau_stars: Vec<f64>,
    /// All copies are bitwise identical.
    pub traces_identical: bool,
    /// All selected thresholds are bitwise identical.
    pub thresholds_agree: bool,
}

impl ConsensusReport {
    pub fn consistent(&self) -> bool {
        self.traces_identical && self.thresholds_agree
    }
}

/// Run [`select_threshold`] on each worker's synchronized copy and report
/// any divergence.
pub fn consensus_check(copies: &[TraceTensor]) -> Result<ConsensusReport> {
    let first = copies
        .first()
        .ok_or_else(|| Error::InvalidParameter("consensus check needs at least one copy".into()))?;
    let traces_identical = copies.iter().all(|c| bitwise_eq(c, first));
    let tau_stars = copies
        .iter()
        .map(|c| select_threshold(c, None).map(|r| r.tau_star))
        .collect::<Result<Vec<_>>>()?;
    let thresholds_agree = tau_stars.iter().all(|t| t.to_bits() == tau_stars[0].to_bits());
    Ok(ConsensusReport {
        tau_stars,
        traces_identical,
        thresholds_agree,
    })
}

fn bitwise_eq(a: &TraceTensor, b: &TraceTensor) -> bool {
    a.iterations == b.iterations
        && a.workers == b.workers
        && a.micro_batches == b.micro_batches
        && a.latencies.iter().zip(&b.latencies).all(|(x, y)| x.to_bits() == y.to_bits())
        && a.comm_times.iter().zip(&b.comm_times).all(|(x, y)| x.to_bits() == y.to_bits())
}
