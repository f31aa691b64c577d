use serde::{Deserialize, Serialize};

use super::problem::{norm_sq, SgdProblem};
use super::schedule::BatchSchedule;
use crate::error::{invalid, Error, Result};
use crate::stats::RngStream;

// Consecutive empty batches tolerated before a run is declared stuck.
const MAX_EMPTY_STREAK: usize = 1_000_000;

/// Per-sample step size `η`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaMode {
    /// `min{‖θ_1−θ*‖/(σ√(8K)), 1/(8 L b_max)}`.
    ConvexTheorem,
    /// `min{√(L(θ_1)−L*)/(σ√(L K)), 1/(2 L b_max)}`.
    NonconvexTheorem,
    Manual { eta: f64 },
}

/// Gradient normalisation per step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `θ ← θ − (η b_max)·Σg/b_max`, i.e. the update `θ − η α_i ĝ_i` with `α_i = b_i`.
    #[default]
    FixedBmax,
    /// `θ ← θ − (η b_max)·Σg/b_i`.
    ActualBatch,
}

/// Learning-rate corrections for a stochastic batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrCorrection {
    #[default]
    None,
    /// Scale the step by `1 − P_drop`.
    ConstantFactor,
    /// Divide the gradient sum by the realised batch.
    Stochastic,
}

/// Multiplier applied to the gradient sum of a step with realised batch
/// `realized` out of `b_max`, for base per-sample step `eta`.
pub fn lr_correction(mode: LrCorrection, eta: f64, p_drop: f64, realized: usize, b_max: usize) -> f64 {
    match mode {
        LrCorrection::None => eta,
        LrCorrection::ConstantFactor => eta * (1.0 - p_drop),
        LrCorrection::Stochastic if realized == 0 => 0.0,
        LrCorrection::Stochastic => eta * b_max as f64 / realized as f64,
    }
}

/// Resolve the per-sample step size for a run of `k` samples.
pub fn theorem_eta(mode: EtaMode, problem: &SgdProblem, b_max: usize, k: u64) -> f64 {
    let l = problem.smoothness();
    let sigma = problem.sigma();
    let k = k as f64;
    let b = b_max as f64;
    match mode {
        EtaMode::Manual { eta } => eta,
        EtaMode::ConvexTheorem => {
            let cap = 1.0 / (8.0 * l * b);
            if sigma == 0.0 {
                cap
            } else {
                (problem.initial_distance() / (sigma * (8.0 * k).sqrt())).min(cap)
            }
        }
        EtaMode::NonconvexTheorem => {
            let cap = 1.0 / (2.0 * l * b);
            if sigma == 0.0 {
                cap
            } else {
                (problem.initial_gap().max(0.0).sqrt() / (sigma * (l * k).sqrt())).min(cap)
            }
        }
    }
}

/// Iterates of one run. Iterate `i` is the point where step `i`'s gradient
/// was evaluated; its weight is `α_i = b_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub dim: usize,
    pub eta: f64,
    /// Samples processed, `Σ α_i = K`.
    pub realized_k: u64,
    pub weights: Vec<f64>,
    /// Row-major `S x d`.
    pub iterates: Vec<f64>,
    pub final_theta: Vec<f64>,
    /// Index drawn with probability `α_i / α_{1:S}`.
    pub sampled_index: usize,
}

impl TrajectoryStats {
    pub fn steps(&self) -> usize {
        self.weights.len()
    }

    pub fn iterate(&self, i: usize) -> &[f64] {
        &self.iterates[i * self.dim..(i + 1) * self.dim]
    }

    /// `θ̄ = Σ α_i θ_i / α_{1:S}`.
    pub fn weighted_average(&self) -> Vec<f64> {
        let total: f64 = self.weights.iter().sum();
        let mut avg = vec![0.0; self.dim];
        for (i, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for (a, t) in avg.iter_mut().zip(self.iterate(i)) {
                *a += w * t;
            }
        }
        avg.iter_mut().for_each(|a| *a /= total);
        avg
    }

    pub fn sampled_iterate(&self) -> &[f64] {
        self.iterate(self.sampled_index)
    }

    /// `Σ α_i ‖∇L(θ_i)‖² / α_{1:S}`: the gradient norm at the sampled iterate,
    /// averaged exactly over the sampling.
    pub fn expected_grad_norm_sq(&self, problem: &SgdProblem) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, w)| w * problem.gradient_norm_sq(self.iterate(i)))
            .sum::<f64>()
            / total
    }
}

/// SGD with stochastic batch sizes until exactly `k` samples are processed
/// (the last batch is truncated). A step with `b_i = 0` leaves `θ` unchanged.
pub fn run_stochastic_sgd(
    problem: &SgdProblem,
    schedule: &BatchSchedule,
    k: u64,
    eta: EtaMode,
    normalization: Normalization,
    rng: &mut RngStream,
) -> Result<TrajectoryStats> {
    schedule.validate()?;
    let b_max = schedule.b_max();
    if k < b_max as u64 {
        return Err(invalid(format!("K = {k} must be at least b_max = {b_max}")));
    }
    let eta = theorem_eta(eta, problem, b_max, k);
    if !(eta.is_finite() && eta > 0.0) {
        return Err(invalid(format!("step size must be positive, got {eta}")));
    }
    let mode = match normalization {
        Normalization::FixedBmax => LrCorrection::None,
        Normalization::ActualBatch => LrCorrection::Stochastic,
    };
    let d = problem.dim();
    let mut theta = problem.theta_init().to_vec();
    let mut grad = vec![0.0; d];
    let mut weights = Vec::new();
    let mut iterates = Vec::new();
    let mut processed = 0u64;
    let mut empty_streak = 0;
    let mut step = 0;
    while processed < k {
        let b = (schedule.draw(step, rng) as u64).min(k - processed) as usize;
        step += 1;
        iterates.extend_from_slice(&theta);
        weights.push(b as f64);
        if b == 0 {
            empty_streak += 1;
            if empty_streak > MAX_EMPTY_STREAK {
                return Err(Error::Domain("schedule produced no samples for too long".into()));
            }
            continue;
        }
        empty_streak = 0;
        processed += b as u64;
        problem.gradient_sum(&theta, b, rng, &mut grad);
        let scale = lr_correction(mode, eta, 0.0, b, b_max);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= scale * g;
        }
    }
    let sampled_index = sample_weighted(&weights, rng);
    Ok(TrajectoryStats {
        dim: d,
        eta,
        realized_k: processed,
        weights,
        iterates,
        final_theta: theta,
        sampled_index,
    })
}

fn sample_weighted(weights: &[f64], rng: &mut RngStream) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.next_f64() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Euclidean distance helper used by reports.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm_sq(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>()).sqrt()
}
