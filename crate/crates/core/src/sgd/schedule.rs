use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sim::{simulate_iteration, SimConfig};
use crate::stats::RngStream;

/// How micro-batches go missing in each step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DropModel {
    None,
    /// Each worker independently drops its whole local batch.
    PerWorkerBernoulli { p_drop: f64 },
    /// Completed micro-batches come from simulated iterations at the
    /// configured threshold.
    TimingDriven { sim: SimConfig },
}

/// Per-step total batch sizes `b_i ∈ [0, b_max]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSchedule {
    pub workers: usize,
    pub micro_batches: usize,
    #[serde(default = "one")]
    pub micro_batch_size: usize,
    pub drop: DropModel,
}

fn one() -> usize {
    1
}

impl BatchSchedule {
    pub fn new(workers: usize, micro_batches: usize, micro_batch_size: usize, drop: DropModel) -> Result<Self> {
        let s = Self {
            workers,
            micro_batches,
            micro_batch_size,
            drop,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn bernoulli(workers: usize, micro_batches: usize, micro_batch_size: usize, p_drop: f64) -> Result<Self> {
        let drop = if p_drop == 0.0 {
            DropModel::None
        } else {
            DropModel::PerWorkerBernoulli { p_drop }
        };
        Self::new(workers, micro_batches, micro_batch_size, drop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.micro_batches == 0 || self.micro_batch_size == 0 {
            return Err(invalid("workers, micro_batches and micro_batch_size must be >= 1"));
        }
        match &self.drop {
            DropModel::None => {}
            DropModel::PerWorkerBernoulli { p_drop } => {
                if !(0.0..1.0).contains(p_drop) {
                    return Err(invalid(format!("p_drop must be in [0, 1), got {p_drop}")));
                }
            }
            DropModel::TimingDriven { sim } => {
                sim.validate()?;
                if sim.workers() != self.workers || sim.micro_batches != self.micro_batches {
                    return Err(invalid("timing-driven schedule must match the simulated fleet shape"));
                }
            }
        }
        Ok(())
    }

    /// `b_max = N·M·|micro-batch|`.
    pub fn b_max(&self) -> usize {
        self.workers * self.micro_batches * self.micro_batch_size
    }

    /// Expected fraction of samples dropped per step, where it has a closed form.
    pub fn expected_drop_rate(&self) -> Option<f64> {
        match &self.drop {
            DropModel::None => Some(0.0),
            DropModel::PerWorkerBernoulli { p_drop } => Some(*p_drop),
            DropModel::TimingDriven { .. } => None,
        }
    }

    /// Realised batch of step `step`.
    pub fn draw(&self, step: usize, rng: &mut RngStream) -> usize {
        let local = self.micro_batches * self.micro_batch_size;
        match &self.drop {
            DropModel::None => self.b_max(),
            DropModel::PerWorkerBernoulli { p_drop } => {
                (0..self.workers).filter(|_| !rng.bernoulli(*p_drop)).count() * local
            }
            DropModel::TimingDriven { sim } => {
                let record = simulate_iteration(sim, step, rng);
                record.completed.iter().sum::<usize>() * self.micro_batch_size
            }
        }
    }

    pub fn with_micro_batch_size(&self, micro_batch_size: usize) -> Result<Self> {
        Self::new(self.workers, self.micro_batches, micro_batch_size, self.drop.clone())
    }
}
