use serde::{Deserialize, Serialize};

use super::{run, warmup_trace, SimConfig};
use crate::analytic::{expected_speedup, GaussianStepModel};
use crate::error::{invalid, Result};
use crate::threshold::select_threshold;

/// How the threshold is chosen at each scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThresholdPolicy {
    /// Baseline only.
    None,
    Fixed { tau: f64 },
    /// Select `τ*` on a warm-up trace of the given length, then run at `τ*`.
    Auto { warmup_iterations: usize },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Auto {
            warmup_iterations: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub workers: usize,
    pub tau: Option<f64>,
    pub baseline_throughput: f64,
    pub drop_throughput: f64,
    /// Baseline throughput per worker.
    pub baseline_efficiency: f64,
    pub s_eff: f64,
    pub drop_rate: f64,
    /// Linear extrapolation of the smallest scale's baseline throughput.
    pub linear_ref: f64,
    /// Expected speedup from the Gaussian model given the measured
    /// slowest-worker compute time; absent for heterogeneous fleets.
    pub analytic_s_eff: Option<f64>,
}

/// Run `template` at every worker count in `workers` (strictly ascending).
///
/// All scales share the template seed, so the first `N` workers of a larger
/// fleet see the same latencies as the smaller fleet.
pub fn scale_sweep(template: &SimConfig, workers: &[usize], policy: &ThresholdPolicy) -> Result<Vec<ScalePoint>> {
    if workers.is_empty() {
        return Err(invalid("worker list is empty"));
    }
    if workers.windows(2).any(|w| w[0] >= w[1]) || workers[0] == 0 {
        return Err(invalid("worker list must be positive and strictly ascending"));
    }
    let mut points = Vec::with_capacity(workers.len());
    let mut reference = None;
    for &n in workers {
        let mut cfg = template.clone();
        cfg.fleet = template.fleet.with_workers(n)?;
        cfg.tau = match policy {
            ThresholdPolicy::None => None,
            ThresholdPolicy::Fixed { tau } => Some(*tau),
            ThresholdPolicy::Auto { warmup_iterations } => {
                let trace = warmup_trace(&cfg, *warmup_iterations)?;
                Some(select_threshold(&trace, None)?.tau_star)
            }
        };
        let stats = run(&cfg)?;
        let per_worker = stats.baseline_throughput / n as f64;
        let reference = *reference.get_or_insert(per_worker);
        let analytic_s_eff = match (cfg.fleet.is_homogeneous(), cfg.tau) {
            (false, _) => None,
            (true, None) => Some(1.0),
            (true, Some(tau)) => {
                let (mu, var) = cfg.fleet.model(0).moments();
                let model = GaussianStepModel::new(mu, var.sqrt(), cfg.micro_batches, n, cfg.comm_time)?;
                Some(expected_speedup(&model, tau, Some(stats.mean_max_compute))?)
            }
        };
        points.push(ScalePoint {
            workers: n,
            tau: cfg.tau,
            baseline_throughput: stats.baseline_throughput,
            drop_throughput: stats.drop_throughput,
            baseline_efficiency: per_worker,
            s_eff: stats.s_eff,
            drop_rate: stats.drop_rate,
            linear_ref: reference * n as f64,
            analytic_s_eff,
        });
    }
    Ok(points)
}
