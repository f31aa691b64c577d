use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::RngStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensationStrategy {
    /// Train `R·I` extra steps.
    ExtraSteps,
    /// Grow every worker's local batch by `1 + R`.
    IncreasedBatch,
    /// Put dropped samples back at the front of the next epoch.
    ResampleDropped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingPlan {
    pub steps: u64,
    pub workers: usize,
    /// Samples per worker per step.
    pub local_batch: usize,
    #[serde(default)]
    pub resample_dropped: bool,
}

impl TrainingPlan {
    pub fn b_max(&self) -> usize {
        self.workers * self.local_batch
    }
}

/// Relative extra work `R = M/M̃ − 1` for completed fraction `M̃/M`.
pub fn compensation_ratio(completed_fraction: f64) -> Result<f64> {
    if !(completed_fraction > 0.0 && completed_fraction <= 1.0) {
        return Err(invalid(format!(
            "completed fraction must be in (0, 1], got {completed_fraction}"
        )));
    }
    Ok(1.0 / completed_fraction - 1.0)
}

/// Adjust `plan` so the expected number of processed samples matches the
/// drop-free plan. Step and batch counts are rounded to the nearest integer.
pub fn apply_compensation(
    strategy: CompensationStrategy,
    plan: &TrainingPlan,
    completed_fraction: f64,
) -> Result<TrainingPlan> {
    let r = compensation_ratio(completed_fraction)?;
    let mut out = plan.clone();
    match strategy {
        CompensationStrategy::ExtraSteps => {
            out.steps = (plan.steps as f64 * (1.0 + r)).round() as u64;
        }
        CompensationStrategy::IncreasedBatch => {
            out.local_batch = (plan.local_batch as f64 * (1.0 + r)).round() as usize;
        }
        CompensationStrategy::ResampleDropped => out.resample_dropped = true,
    }
    Ok(out)
}

/// Epoch-based sampler over `0..dataset_size` that can re-enqueue dropped
/// samples at the start of the next epoch.
#[derive(Clone, Debug)]
pub struct EpochSampler {
    dataset_size: usize,
    order: Vec<usize>,
    position: usize,
    carry: Vec<usize>,
    epoch: usize,
    rng: RngStream,
}

impl EpochSampler {
    pub fn new(dataset_size: usize, rng: RngStream) -> Result<Self> {
        if dataset_size == 0 {
            return Err(invalid("dataset must not be empty"));
        }
        let mut s = Self {
            dataset_size,
            order: Vec::new(),
            position: 0,
            carry: Vec::new(),
            epoch: 0,
            rng,
        };
        s.start_epoch();
        s.epoch = 0;
        Ok(s)
    }

    fn start_epoch(&mut self) {
        let mut order = std::mem::take(&mut self.carry);
        let mut fresh: Vec<usize> = (0..self.dataset_size).collect();
        fresh.shuffle(&mut self.rng);
        order.extend(fresh);
        self.order = order;
        self.position = 0;
        self.epoch += 1;
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.position == self.order.len() {
                self.start_epoch();
            }
            let take = (size - batch.len()).min(self.order.len() - self.position);
            batch.extend_from_slice(&self.order[self.position..self.position + take]);
            self.position += take;
        }
        batch
    }

    /// Queue samples that were drawn but not computed for the next epoch.
    pub fn report_dropped(&mut self, samples: &[usize]) {
        self.carry.extend_from_slice(samples);
    }
}
