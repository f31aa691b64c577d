//! Step-time model of Local-SGD (parameter averaging every `H` local steps)
//! with random stragglers, with and without per-step compute thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::latency::FleetSpec;
use crate::par;
use crate::stats::{stream_id, RngStream};

const LOCAL_SGD_DOMAIN: u64 = 0x6c6f_6361;

/// Which workers can straggle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StragglerMode {
    /// Every worker straggles independently with probability `p`.
    #[default]
    Uniform,
    /// Only the first `server_size` workers straggle, each with probability
    /// `min(1, p·N/server_size)`, which keeps the expected straggler count
    /// per step at `p·N`.
    SingleServer {
        #[serde(default = "default_server_size")]
        server_size: usize,
    },
}

fn default_server_size() -> usize {
    8
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSgdConfig {
    /// Per-local-step compute time of each worker.
    pub fleet: FleetSpec,
    /// Local steps between synchronizations (`H`).
    pub sync_period: usize,
    pub straggler_prob: f64,
    /// Extra seconds a straggling worker spends on the step.
    pub straggler_delay: f64,
    #[serde(default)]
    pub mode: StragglerMode,
    /// Total local steps per worker.
    pub steps: usize,
    #[serde(default)]
    pub comm_time: f64,
    /// Per-step compute threshold; defaults to 1.25x the mean step time.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl LocalSgdConfig {
    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        if self.sync_period == 0 {
            return Err(invalid("sync_period must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.straggler_prob) {
            return Err(invalid(format!("straggler_prob must be in [0, 1], got {}", self.straggler_prob)));
        }
        if !(self.straggler_delay.is_finite() && self.straggler_delay >= 0.0) {
            return Err(invalid(format!("straggler_delay must be >= 0, got {}", self.straggler_delay)));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be >= 1"));
        }
        if !(self.comm_time.is_finite() && self.comm_time >= 0.0) {
            return Err(invalid(format!("comm_time must be >= 0, got {}", self.comm_time)));
        }
        if let StragglerMode::SingleServer { server_size } = self.mode {
            if server_size == 0 || server_size > self.fleet.workers {
                return Err(invalid(format!(
                    "server_size must be in 1..={}, got {server_size}",
                    self.fleet.workers
                )));
            }
        }
        if let Some(tau) = self.tau {
            if tau.is_nan() || tau <= 0.0 {
                return Err(invalid(format!("tau must be > 0, got {tau}")));
            }
        }
        Ok(())
    }

    /// Threshold in effect: the configured one or 1.25x the mean step time.
    pub fn effective_tau(&self) -> f64 {
        self.tau.unwrap_or_else(|| {
            let n = self.fleet.workers;
            let mean = (0..n).map(|k| self.fleet.model(k).moments().0).sum::<f64>() / n as f64;
            1.25 * mean
        })
    }

    fn straggler_chance(&self, worker: usize) -> f64 {
        match self.mode {
            StragglerMode::Uniform => self.straggler_prob,
            StragglerMode::SingleServer { server_size } if worker < server_size => {
                (self.straggler_prob * self.fleet.workers as f64 / server_size as f64).min(1.0)
            }
            StragglerMode::SingleServer { .. } => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSgdResult {
    pub sync_period: usize,
    pub tau: f64,
    /// Total time of synchronous training (averaging after every step).
    pub sync_time: f64,
    pub local_sgd_time: f64,
    pub dropcompute_time: f64,
    /// `sync_time / local_sgd_time`.
    pub local_sgd_speedup: f64,
    /// `sync_time / dropcompute_time`.
    pub dropcompute_speedup: f64,
    /// Fraction of local steps cut by the threshold.
    pub drop_rate: f64,
}

/// Simulate `steps` local steps of every worker. Synchronous training pays
/// `max_n c + T_c` per step; Local-SGD pays `max_n Σ_h c + T_c` per period
/// of `H` steps; with thresholds each step costs `min(c, τ)` and a step
/// reaching `τ` is dropped.
pub fn local_sgd_run(config: &LocalSgdConfig) -> Result<LocalSgdResult> {
    config.validate()?;
    let n = config.fleet.workers;
    let tau = config.effective_tau();
    let steps: Vec<Vec<f64>> = par::map(config.steps, |s| {
        let mut rng = RngStream::new(config.seed, stream_id(&[LOCAL_SGD_DOMAIN, s as u64]));
        (0..n)
            .map(|w| {
                let base = config.fleet.model(w).micro_batch_time(&mut rng);
                let straggles = rng.bernoulli(config.straggler_chance(w));
                if straggles {
                    base + config.straggler_delay
                } else {
                    base
                }
            })
            .collect()
    });

    let tc = config.comm_time;
    let mut sync_time = 0.0;
    for c in &steps {
        sync_time += c.iter().cloned().fold(0.0, f64::max) + tc;
    }
    let (mut local_time, mut drop_time, mut dropped) = (0.0, 0.0, 0usize);
    for period in steps.chunks(config.sync_period) {
        let mut plain = vec![0.0; n];
        let mut cut = vec![0.0; n];
        for c in period {
            for w in 0..n {
                plain[w] += c[w];
                cut[w] += c[w].min(tau);
                dropped += usize::from(c[w] >= tau);
            }
        }
        local_time += plain.iter().cloned().fold(0.0, f64::max) + tc;
        drop_time += cut.iter().cloned().fold(0.0, f64::max) + tc;
    }
    Ok(LocalSgdResult {
        sync_period: config.sync_period,
        tau,
        sync_time,
        local_sgd_time: local_time,
        dropcompute_time: drop_time,
        local_sgd_speedup: sync_time / local_time,
        dropcompute_speedup: sync_time / drop_time,
        drop_rate: dropped as f64 / (n * config.steps) as f64,
    })
}
