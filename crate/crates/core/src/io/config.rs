//! JSON experiment configurations. Unknown keys are rejected.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::FleetSpec;
use crate::sim::{LocalSgdConfig, SimConfig, StragglerMode, ThresholdPolicy};

fn default_warmup() -> usize {
    100
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauKeyword {
    /// Select `τ*` on a warm-up trace.
    Auto,
    /// Baseline, no threshold.
    None,
}

/// `"tau"`: seconds, `"auto"`, `"none"` or `null`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TauSetting {
    Seconds(f64),
    Keyword(TauKeyword),
}

fn policy(tau: Option<TauSetting>, warmup_iterations: usize) -> ThresholdPolicy {
    match tau {
        None | Some(TauSetting::Keyword(TauKeyword::None)) => ThresholdPolicy::None,
        Some(TauSetting::Keyword(TauKeyword::Auto)) => ThresholdPolicy::Auto { warmup_iterations },
        Some(TauSetting::Seconds(tau)) => ThresholdPolicy::Fixed { tau },
    }
}

/// Local-SGD block of a `simulate` config (`--mode local-sgd`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSgdBlock {
    pub sync_periods: Vec<usize>,
    pub straggler_prob: f64,
    pub straggler_delay: f64,
    #[serde(default)]
    pub mode: StragglerMode,
    pub steps: usize,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub fleet: FleetSpec,
    pub micro_batches: usize,
    #[serde(default)]
    pub comm_time: f64,
    #[serde(default)]
    pub tau: Option<TauSetting>,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_iterations: usize,
    #[serde(default)]
    pub stop_at_accumulation_boundary: bool,
    #[serde(default)]
    pub local_sgd: Option<LocalSgdBlock>,
}

impl SimulateConfig {
    pub fn policy(&self) -> ThresholdPolicy {
        policy(self.tau, self.warmup_iterations)
    }

    /// Simulation config without a threshold.
    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::new(
            self.fleet.clone(),
            self.micro_batches,
            self.comm_time,
            self.iterations,
            self.seed,
        )?;
        cfg.stop_at_accumulation_boundary = self.stop_at_accumulation_boundary;
        Ok(cfg)
    }

    pub fn local_sgd_configs(&self) -> Result<Vec<LocalSgdConfig>> {
        let block = self
            .local_sgd
            .as_ref()
            .ok_or_else(|| Error::Config("local-sgd mode needs a `local_sgd` block".into()))?;
        if block.sync_periods.is_empty() {
            return Err(Error::Config("`local_sgd.sync_periods` is empty".into()));
        }
        block
            .sync_periods
            .iter()
            .map(|&h| {
                let cfg = LocalSgdConfig {
                    fleet: self.fleet.clone(),
                    sync_period: h,
                    straggler_prob: block.straggler_prob,
                    straggler_delay: block.straggler_delay,
                    mode: block.mode,
                    steps: block.steps,
                    comm_time: self.comm_time,
                    tau: block.tau,
                    seed: self.seed,
                };
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleSweepConfig {
    /// Worker model(s); the worker count is replaced by each entry of `n_list`.
    pub fleet: FleetSpec,
    pub n_list: Vec<usize>,
    pub micro_batches: usize,
    #[serde(default)]
    pub comm_time: f64,
    #[serde(default)]
    pub tau: Option<TauSetting>,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_warmup")]
    pub warmup_iterations: usize,
}

impl ScaleSweepConfig {
    pub fn policy(&self) -> ThresholdPolicy {
        policy(self.tau, self.warmup_iterations)
    }

    pub fn template(&self) -> Result<SimConfig> {
        SimConfig::new(self.fleet.clone(), self.micro_batches, self.comm_time, self.iterations, self.seed)
    }
}

fn default_p_drops() -> Vec<f64> {
    vec![0.0, 0.05, 0.1, 0.2]
}

fn default_ks() -> Vec<u64> {
    vec![10_000, 100_000]
}

fn default_seeds() -> usize {
    100
}

fn unit() -> f64 {
    1.0
}

/// `sgd-bench`: quadratic (convex bound) and sinusoidal (nonconvex bound)
/// problems over a grid of drop probabilities and sample budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdBenchConfig {
    #[serde(default = "QuadraticBlock::default")]
    pub quadratic: QuadraticBlock,
    #[serde(default = "SinusoidalBlock::default")]
    pub sinusoidal: SinusoidalBlock,
    #[serde(default = "eight")]
    pub workers: usize,
    #[serde(default = "four")]
    pub micro_batches: usize,
    #[serde(default = "one")]
    pub micro_batch_size: usize,
    #[serde(default = "default_p_drops")]
    pub p_drops: Vec<f64>,
    #[serde(default = "default_ks")]
    pub ks: Vec<u64>,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Actual gradient noise relative to the declared `σ` (negative control when > 1).
    #[serde(default = "unit")]
    pub noise_multiplier: f64,
}

fn eight() -> usize {
    8
}

fn four() -> usize {
    4
}

fn one() -> usize {
    1
}

impl Default for SgdBenchConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticBlock {
    pub dim: usize,
    pub smoothness: f64,
    pub sigma: f64,
    /// `‖θ_1 − θ*‖`.
    pub distance: f64,
}

impl Default for QuadraticBlock {
    fn default() -> Self {
        Self {
            dim: 10,
            smoothness: 1.0,
            sigma: 1.0,
            distance: 10f64.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidalBlock {
    pub dim: usize,
    pub a: f64,
    pub c: f64,
    pub sigma: f64,
    pub start: f64,
}

impl Default for SinusoidalBlock {
    fn default() -> Self {
        Self {
            dim: 10,
            a: 1.0,
            c: 2.0,
            sigma: 1.0,
            start: 3.5,
        }
    }
}

/// Parse a JSON config; errors carry the source name, line and column.
pub fn parse_config<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("{source}:{}:{}: {e}", e.line(), e.column())))
}
