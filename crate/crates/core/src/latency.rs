//! Per-micro-batch compute latency models.
//!
//! A worker's micro-batch time is a base mean plus a random noise term.
//! The noise is either added in seconds (`AdditiveAbsolute`) or scaled by
//! the base mean (`AdditiveScaledByMean`, `t = μ + μ·ε`).

use rand_distr::{Distribution, Exp, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{std_normal_cdf, RngStream};

/// Parametric or empirical description of the noise term ε.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    /// Degenerate distribution; every draw equals `value`.
    Constant { value: f64 },
    Normal { mean: f64, std: f64 },
    LogNormal { log_mean: f64, log_std: f64 },
    /// `min(Z / scale_divisor, bound)` with `Z ~ LogNormal(log_mean, log_std)`.
    BoundedLogNormal {
        log_mean: f64,
        log_std: f64,
        scale_divisor: f64,
        bound: f64,
    },
    /// `scale · Bernoulli(p)`.
    Bernoulli { p: f64, scale: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    /// Resampled uniformly with replacement.
    Empirical { samples: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite, got {v}")))
    }
}

impl NoiseSpec {
    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::Normal { mean, std }.validated()
    }

    pub fn log_normal(log_mean: f64, log_std: f64) -> Result<Self> {
        Self::LogNormal { log_mean, log_std }.validated()
    }

    pub fn bounded_log_normal(log_mean: f64, log_std: f64, scale_divisor: f64, bound: f64) -> Result<Self> {
        Self::BoundedLogNormal {
            log_mean,
            log_std,
            scale_divisor,
            bound,
        }
        .validated()
    }

    pub fn bernoulli(p: f64, scale: f64) -> Result<Self> {
        Self::Bernoulli { p, scale }.validated()
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::Exponential { rate }.validated()
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        Self::Gamma { shape, rate }.validated()
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        Self::Empirical { samples }.validated()
    }

    /// The simulated-delay noise used for the BERT-scale runtime experiments:
    /// `Z ~ LogNormal(4, 1)`, divisor `2e^{4.5}`, bound `5.5`.
    pub fn heavy_tail_delay() -> Self {
        Self::BoundedLogNormal {
            log_mean: 4.0,
            log_std: 1.0,
            scale_divisor: 2.0 * 4.5_f64.exp(),
            bound: 5.5,
        }
    }

    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Constant { value } => finite("constant value", value),
            NoiseSpec::Normal { mean, std } => {
                finite("normal mean", mean)?;
                positive("normal std", std)
            }
            NoiseSpec::LogNormal { log_mean, log_std } => {
                finite("lognormal log_mean", log_mean)?;
                positive("lognormal log_std", log_std)
            }
            NoiseSpec::BoundedLogNormal {
                log_mean,
                log_std,
                scale_divisor,
                bound,
            } => {
                finite("bounded lognormal log_mean", log_mean)?;
                positive("bounded lognormal log_std", log_std)?;
                positive("bounded lognormal scale_divisor", scale_divisor)?;
                positive("bounded lognormal bound", bound)
            }
            NoiseSpec::Bernoulli { p, scale } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("bernoulli p must lie in [0, 1], got {p}")));
                }
                positive("bernoulli scale", scale)
            }
            NoiseSpec::Exponential { rate } => positive("exponential rate", rate),
            NoiseSpec::Gamma { shape, rate } => {
                positive("gamma shape", shape)?;
                positive("gamma rate", rate)
            }
            NoiseSpec::Empirical { ref samples } => {
                if samples.is_empty() {
                    return Err(invalid("empirical noise needs at least one sample"));
                }
                if let Some(bad) = samples.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                    return Err(invalid(format!("empirical samples must be positive, got {bad}")));
                }
                Ok(())
            }
        }
    }

    /// One draw of ε. Parameters are assumed valid.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Constant { value } => value,
            NoiseSpec::Normal { mean, std } => Normal::new(mean, std).expect("validated").sample(rng),
            NoiseSpec::LogNormal { log_mean, log_std } => {
                LogNormal::new(log_mean, log_std).expect("validated").sample(rng)
            }
            NoiseSpec::BoundedLogNormal {
                log_mean,
                log_std,
                scale_divisor,
                bound,
            } => {
                let z = LogNormal::new(log_mean, log_std).expect("validated").sample(rng);
                (z / scale_divisor).min(bound)
            }
            NoiseSpec::Bernoulli { p, scale } => {
                if rng.bernoulli(p) {
                    scale
                } else {
                    0.0
                }
            }
            NoiseSpec::Exponential { rate } => Exp::new(rate).expect("validated").sample(rng),
            NoiseSpec::Gamma { shape, rate } => Gamma::new(shape, 1.0 / rate).expect("validated").sample(rng),
            NoiseSpec::Empirical { ref samples } => samples[rng.next_index(samples.len())],
        }
    }

    /// Mean and variance of ε.
    ///
    /// Bounded lognormal uses the partial-expectation identity
    /// `E[X 1{X<b}] = e^{m+s²/2} Φ((ln b − m − s²)/s)` for `X ~ LN(m, s)`.
    /// Empirical uses the population moments of the samples (the moments of
    /// the bootstrap distribution).
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            NoiseSpec::None => (0.0, 0.0),
            NoiseSpec::Constant { value } => (value, 0.0),
            NoiseSpec::Normal { mean, std } => (mean, std * std),
            NoiseSpec::LogNormal { log_mean, log_std } => {
                let s2 = log_std * log_std;
                let mean = (log_mean + s2 / 2.0).exp();
                (mean, mean * mean * s2.exp_m1())
            }
            NoiseSpec::BoundedLogNormal {
                log_mean,
                log_std,
                scale_divisor,
                bound,
            } => {
                let m = log_mean - scale_divisor.ln();
                let s = log_std;
                let lb = bound.ln();
                let tail = 1.0 - std_normal_cdf((lb - m) / s);
                let first = (m + s * s / 2.0).exp() * std_normal_cdf((lb - m - s * s) / s) + bound * tail;
                let second =
                    (2.0 * m + 2.0 * s * s).exp() * std_normal_cdf((lb - m - 2.0 * s * s) / s) + bound * bound * tail;
                (first, second - first * first)
            }
            NoiseSpec::Bernoulli { p, scale } => (p * scale, scale * scale * p * (1.0 - p)),
            NoiseSpec::Exponential { rate } => (1.0 / rate, 1.0 / (rate * rate)),
            NoiseSpec::Gamma { shape, rate } => (shape / rate, shape / (rate * rate)),
            NoiseSpec::Empirical { ref samples } => {
                let n = samples.len() as f64;
                let mean = samples.iter().sum::<f64>() / n;
                let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (mean, var)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `t = base + ε`
    #[default]
    AdditiveAbsolute,
    /// `t = base + base·ε`
    AdditiveScaledByMean,
}

/// Micro-batch latency model of a single worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkerLatencyModel {
    pub base_mean: f64,
    #[serde(default = "default_noise")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub noise_mode: NoiseMode,
}

fn default_noise() -> NoiseSpec {
    NoiseSpec::None
}

impl WorkerLatencyModel {
    pub fn new(base_mean: f64, noise: NoiseSpec, noise_mode: NoiseMode) -> Result<Self> {
        let model = Self {
            base_mean,
            noise,
            noise_mode,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn deterministic(base_mean: f64) -> Result<Self> {
        Self::new(base_mean, NoiseSpec::None, NoiseMode::AdditiveAbsolute)
    }

    /// Bootstrap model over recorded micro-batch latencies.
    pub fn from_trace(samples: &[f64]) -> Result<Self> {
        let noise = NoiseSpec::empirical(samples.to_vec())?;
        Self::new(0.0, noise, NoiseMode::AdditiveAbsolute)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_mean.is_finite() && self.base_mean >= 0.0) {
            return Err(invalid(format!("base_mean must be finite and >= 0, got {}", self.base_mean)));
        }
        self.noise.validate()?;
        let (mean, _) = self.moments();
        if mean.is_nan() || mean <= 0.0 {
            return Err(invalid(format!("micro-batch time must have positive mean, got {mean}")));
        }
        Ok(())
    }

    /// Mean and variance of the micro-batch time, ignoring the positivity clamp.
    pub fn moments(&self) -> (f64, f64) {
        let (m, v) = self.noise.moments();
        match self.noise_mode {
            NoiseMode::AdditiveAbsolute => (self.base_mean + m, v),
            NoiseMode::AdditiveScaledByMean => (self.base_mean * (1.0 + m), self.base_mean * self.base_mean * v),
        }
    }

    fn floor(&self) -> f64 {
        let scale = if self.base_mean > 0.0 {
            self.base_mean
        } else {
            self.moments().0
        };
        1e-6 * scale
    }

    /// Draw one micro-batch compute time; always strictly positive.
    #[inline]
    pub fn micro_batch_time(&self, rng: &mut RngStream) -> f64 {
        let eps = self.noise.sample(rng);
        let t = match self.noise_mode {
            NoiseMode::AdditiveAbsolute => self.base_mean + eps,
            NoiseMode::AdditiveScaledByMean => self.base_mean + self.base_mean * eps,
        };
        t.max(self.floor())
    }
}

/// Worker fleet: `workers` replicas sharing one model, or one model per worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub workers: usize,
    /// Either a single shared model or exactly `workers` models.
    pub models: Vec<WorkerLatencyModel>,
}

impl FleetSpec {
    pub fn homogeneous(workers: usize, model: WorkerLatencyModel) -> Result<Self> {
        let fleet = Self {
            workers,
            models: vec![model],
        };
        fleet.validate()?;
        Ok(fleet)
    }

    pub fn heterogeneous(models: Vec<WorkerLatencyModel>) -> Result<Self> {
        let fleet = Self {
            workers: models.len(),
            models,
        };
        fleet.validate()?;
        Ok(fleet)
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(invalid("fleet needs at least one worker"));
        }
        if self.models.len() != 1 && self.models.len() != self.workers {
            return Err(invalid(format!(
                "fleet has {} workers but {} models (expected 1 or {})",
                self.workers,
                self.models.len(),
                self.workers
            )));
        }
        self.models.iter().try_for_each(WorkerLatencyModel::validate)
    }

    /// Same models with a different worker count. Only valid for homogeneous fleets.
    pub fn with_workers(&self, workers: usize) -> Result<Self> {
        if self.models.len() != 1 {
            return Err(invalid("only homogeneous fleets can be resized"));
        }
        Self::homogeneous(workers, self.models[0].clone())
    }

    #[inline]
    pub fn model(&self, worker: usize) -> &WorkerLatencyModel {
        if self.models.len() == 1 {
            &self.models[0]
        } else {
            &self.models[worker]
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.models.len() == 1
    }
}

/// Draw one micro-batch time from a worker model.
pub fn micro_batch_time(model: &WorkerLatencyModel, rng: &mut RngStream) -> f64 {
    model.micro_batch_time(rng)
}

/// Analytic (or sample) mean and variance of a worker model.
pub fn moments(model: &WorkerLatencyModel) -> (f64, f64) {
    model.moments()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean_variance;

    fn draws(spec: &NoiseSpec, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| spec.sample(&mut rng)).collect()
    }

    fn assert_moments_match(spec: &NoiseSpec) {
        let xs = draws(spec, 1_000_000, 11);
        let (m, v) = mean_variance(&xs);
        let (em, ev) = spec.moments();
        assert!((m - em).abs() <= 0.01 * em.abs(), "{spec:?}: mean {m} vs {em}");
        assert!((v - ev).abs() <= 0.01 * ev.abs(), "{spec:?}: var {v} vs {ev}");
    }

    #[test]
    fn parametric_moments_match_monte_carlo() {
        for spec in [
            NoiseSpec::normal(0.23, 0.22).unwrap(),
            NoiseSpec::log_normal(-1.84, 0.83).unwrap(),
            NoiseSpec::bernoulli(0.5, 0.45).unwrap(),
            NoiseSpec::exponential(4.47).unwrap(),
            NoiseSpec::gamma(1.0, 4.5).unwrap(),
            NoiseSpec::gamma(2.5, 3.0).unwrap(),
            NoiseSpec::heavy_tail_delay(),
        ] {
            assert_moments_match(&spec);
        }
    }

    #[test]
    fn noise_table_rows() {
        // Each row of the noise-type table targets Mean(ε) = 0.225, Var(ε) = 0.05;
        // the listed parameters are rounded, so allow that rounding.
        let (m, v) = NoiseSpec::bernoulli(0.5, 0.45).unwrap().moments();
        assert!((m - 0.225).abs() < 1e-15);
        assert!((v - 0.050625).abs() < 1e-15);

        let (m, v) = NoiseSpec::log_normal(-1.84, 0.83).unwrap().moments();
        assert!((m - 0.225).abs() < 0.003 && (v - 0.05).abs() < 0.002, "{m} {v}");

        let (m, v) = NoiseSpec::normal(0.23, 0.22).unwrap().moments();
        assert!((m - 0.225).abs() < 0.01 && (v - 0.05).abs() < 0.002);

        let (m, v) = NoiseSpec::exponential(4.47).unwrap().moments();
        assert!((m - 0.2237).abs() < 1e-4 && (v - 0.0500).abs() < 1e-4);
    }

    #[test]
    fn lognormal_table_row_by_monte_carlo() {
        let xs = draws(&NoiseSpec::log_normal(-1.84, 0.83).unwrap(), 1_000_000, 5);
        let (m, v) = mean_variance(&xs);
        assert!((m - 0.225).abs() < 0.003);
        assert!((v - 0.05).abs() < 0.002);
    }

    #[test]
    fn bernoulli_mean_by_monte_carlo() {
        let xs = draws(&NoiseSpec::bernoulli(0.5, 0.45).unwrap(), 1_000_000, 6);
        let (m, _) = mean_variance(&xs);
        assert!((m - 0.225).abs() < 0.001);
    }

    #[test]
    fn constant_is_degenerate() {
        let xs = draws(&NoiseSpec::Constant { value: 0.3 }, 1000, 1);
        assert!(xs.iter().all(|&x| x == 0.3));
    }

    #[test]
    fn bounded_lognormal_moments_by_quadrature() {
        // Integrate min(e^y / a, b) against the N(m, s²) density in log space.
        let (log_mean, log_std, a, b) = (4.0, 1.0, 2.0 * 4.5_f64.exp(), 5.5);
        let n = 400_000;
        let (lo, hi) = (log_mean - 12.0 * log_std, log_mean + 12.0 * log_std);
        let h = (hi - lo) / n as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 0..=n {
            let y = lo + k as f64 * h;
            let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            let z = (y - log_mean) / log_std;
            let dens = (-0.5 * z * z).exp() / (log_std * (2.0 * std::f64::consts::PI).sqrt());
            let x = (y.exp() / a).min(b);
            m1 += w * dens * x;
            m2 += w * dens * x * x;
        }
        m1 *= h / 3.0;
        m2 *= h / 3.0;
        let (em, ev) = NoiseSpec::heavy_tail_delay().moments();
        assert!((em - m1).abs() < 1e-9, "{em} vs {m1}");
        assert!((ev - (m2 - m1 * m1)).abs() < 1e-9);
    }

    #[test]
    fn heavy_tail_delay_scales_accumulation_by_one_and_a_half() {
        let model = WorkerLatencyModel::new(0.45, NoiseSpec::heavy_tail_delay(), NoiseMode::AdditiveScaledByMean).unwrap();
        let mut rng = RngStream::new(9, 9);
        let xs: Vec<f64> = (0..1_000_000).map(|_| model.micro_batch_time(&mut rng)).collect();
        let (m, _) = mean_variance(&xs);
        assert!((m / 0.45 - 1.5).abs() < 0.03, "ratio {}", m / 0.45);
        let max = xs.iter().cloned().fold(0.0, f64::max);
        assert!(max <= 6.5 * 0.45 + 1e-12);
        let (eps_mean, _) = NoiseSpec::heavy_tail_delay().moments();
        assert!((eps_mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn noiseless_model_is_exact() {
        let model = WorkerLatencyModel::deterministic(0.45).unwrap();
        let mut rng = RngStream::new(1, 1);
        assert_eq!(model.micro_batch_time(&mut rng), 0.45);
        assert_eq!(model.moments(), (0.45, 0.0));
    }

    #[test]
    fn gamma_additive_absolute_mean() {
        let model = WorkerLatencyModel::new(0.45, NoiseSpec::gamma(1.0, 4.5).unwrap(), NoiseMode::AdditiveAbsolute).unwrap();
        let mut rng = RngStream::new(2, 2);
        let xs: Vec<f64> = (0..1_000_000).map(|_| model.micro_batch_time(&mut rng)).collect();
        let (m, _) = mean_variance(&xs);
        assert!((m - 0.675).abs() < 0.003, "{m}");
    }

    #[test]
    fn negative_draws_are_clamped() {
        let model = WorkerLatencyModel::new(0.1, NoiseSpec::normal(0.0, 1.0).unwrap(), NoiseMode::AdditiveAbsolute).unwrap();
        let mut rng = RngStream::new(3, 3);
        for _ in 0..10_000 {
            assert!(model.micro_batch_time(&mut rng) >= 1e-7);
        }
    }

    #[test]
    fn trace_models() {
        let single = WorkerLatencyModel::from_trace(&[0.45]).unwrap();
        let mut rng = RngStream::new(4, 4);
        assert!((0..100).all(|_| single.micro_batch_time(&mut rng) == 0.45));

        let pair = WorkerLatencyModel::from_trace(&[0.4, 0.5]).unwrap();
        let xs: Vec<f64> = (0..1_000_000).map(|_| pair.micro_batch_time(&mut rng)).collect();
        assert!((mean_variance(&xs).0 - 0.45).abs() < 0.001);

        assert!(WorkerLatencyModel::from_trace(&[]).is_err());
        assert!(WorkerLatencyModel::from_trace(&[0.4, -1.0]).is_err());
        assert!(WorkerLatencyModel::from_trace(&[0.4, 0.0]).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NoiseSpec::normal(0.0, 0.0).is_err());
        assert!(NoiseSpec::bernoulli(1.5, 1.0).is_err());
        assert!(NoiseSpec::exponential(-1.0).is_err());
        assert!(NoiseSpec::gamma(0.0, 1.0).is_err());
        assert!(NoiseSpec::empirical(vec![]).is_err());
        assert!(WorkerLatencyModel::deterministic(0.0).is_err());
        assert!(FleetSpec::homogeneous(0, WorkerLatencyModel::deterministic(1.0).unwrap()).is_err());
    }

    #[test]
    fn noise_spec_json_roundtrip_and_strictness() {
        let spec = NoiseSpec::heavy_tail_delay();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<NoiseSpec>(&json).unwrap(), spec);
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"kind":"exponential","rate":1.0,"bogus":2}"#).is_err());
    }
}
