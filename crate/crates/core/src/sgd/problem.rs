use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{stream_id, RngStream};

const DATA_DOMAIN: u64 = 0x6461_7461;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// `½(θ−θ*)ᵀA(θ−θ*)` with diagonal `A`, additive isotropic gradient noise.
    Quadratic,
    /// L2-regularised logistic regression on a synthetic dataset; per-sample
    /// gradients come from uniformly drawn examples.
    LogisticSynthetic,
    /// `Σ_k ½aθ_k² + c·cos θ_k`, nonconvex when `c > a`, additive noise.
    Sinusoidal,
}

#[derive(Clone, Debug, PartialEq)]
enum Data {
    Quadratic { curvature: Vec<f64> },
    Logistic { features: Vec<f64>, labels: Vec<f64>, reg: f64 },
    Sinusoidal { a: f64, c: f64 },
}

/// Smooth objective with known constants and a stochastic gradient oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdProblem {
    kind: ProblemKind,
    dim: usize,
    smoothness: f64,
    /// Declared per-sample gradient noise bound.
    sigma: f64,
    /// Actual noise is `noise_multiplier · sigma` for the additive-noise kinds.
    noise_multiplier: f64,
    theta_star: Vec<f64>,
    optimum: f64,
    theta_init: Vec<f64>,
    data: Data,
}

impl SgdProblem {
    /// Quadratic with spectrum `linspace(0.1, L, d)` (`[L]` when `d = 1`),
    /// `θ*` alternating `±1` and `θ_1 = θ* + (distance/√d)·1`.
    pub fn quadratic(dim: usize, smoothness: f64, sigma: f64, distance: f64) -> Result<Self> {
        check_common(dim, smoothness, sigma)?;
        if smoothness.is_nan() || smoothness < 0.1 {
            return Err(invalid("quadratic smoothness must be >= 0.1"));
        }
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(invalid("initial distance must be >= 0"));
        }
        let curvature: Vec<f64> = if dim == 1 {
            vec![smoothness]
        } else {
            (0..dim)
                .map(|k| 0.1 + (smoothness - 0.1) * k as f64 / (dim - 1) as f64)
                .collect()
        };
        let theta_star: Vec<f64> = (0..dim).map(|k| if k.is_multiple_of(2) { 1.0 } else { -1.0 }).collect();
        let shift = distance / (dim as f64).sqrt();
        let theta_init = theta_star.iter().map(|t| t + shift).collect();
        Ok(Self {
            kind: ProblemKind::Quadratic,
            dim,
            smoothness,
            sigma,
            noise_multiplier: 1.0,
            theta_star,
            optimum: 0.0,
            theta_init,
            data: Data::Quadratic { curvature },
        })
    }

    /// Nonconvex separable objective `Σ ½aθ_k² + c·cos θ_k` with `L = a + c`.
    /// The minimiser is located by a dense scan plus Newton polishing.
    pub fn sinusoidal(dim: usize, a: f64, c: f64, sigma: f64, start: f64) -> Result<Self> {
        check_common(dim, a + c, sigma)?;
        if !(a > 0.0 && c >= 0.0) {
            return Err(invalid("sinusoidal problem needs a > 0 and c >= 0"));
        }
        let f = |x: f64| 0.5 * a * x * x + c * x.cos();
        // Minimisers lie in |x| <= c/a.
        let span = c / a + 1.0;
        let mut best = 0.0;
        for k in 0..=200_000 {
            let x = -span + 2.0 * span * k as f64 / 200_000.0;
            if f(x) < f(best) {
                best = x;
            }
        }
        for _ in 0..50 {
            let g = a * best - c * best.sin();
            let h = a - c * best.cos();
            if h <= 0.0 {
                break;
            }
            best -= g / h;
        }
        let best = best.abs();
        // Coordinates start on alternating sides; take the minimiser on the same side.
        let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let theta_star = (0..dim).map(|k| sign(k) * best).collect();
        let theta_init = (0..dim).map(|k| sign(k) * start).collect();
        Ok(Self {
            kind: ProblemKind::Sinusoidal,
            dim,
            smoothness: a + c,
            sigma,
            noise_multiplier: 1.0,
            theta_star,
            optimum: dim as f64 * f(best),
            theta_init,
            data: Data::Sinusoidal { a, c },
        })
    }

    /// Logistic regression on `samples` synthetic examples with `±1` labels
    /// from a planted model, 10% of labels flipped. `σ² = mean‖x‖²` bounds
    /// the per-sample gradient variance everywhere; `L = λ_max(XᵀX/n)/4 + λ`
    /// (power iteration). `θ*` comes from gradient descent run to a gradient
    /// norm below `1e-12`.
    pub fn logistic_synthetic(dim: usize, samples: usize, reg: f64, seed: u64) -> Result<Self> {
        if dim == 0 || samples == 0 {
            return Err(invalid("dimension and sample count must be >= 1"));
        }
        if !(reg > 0.0 && reg.is_finite()) {
            return Err(invalid("regularisation must be > 0"));
        }
        let mut rng = RngStream::new(seed, stream_id(&[DATA_DOMAIN]));
        let planted: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut features = Vec::with_capacity(samples * dim);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x: Vec<f64> = (0..dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .map(|v: f64| v / (dim as f64).sqrt())
                .collect();
            let margin: f64 = dot(&x, &planted);
            let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
            if rng.bernoulli(0.1) {
                y = -y;
            }
            features.extend(x);
            labels.push(y);
        }
        let sigma = (features.chunks_exact(dim).map(|x| dot(x, x)).sum::<f64>() / samples as f64).sqrt();
        let smoothness = power_iteration(&features, dim) / (4.0 * samples as f64) + reg;
        let mut problem = Self {
            kind: ProblemKind::LogisticSynthetic,
            dim,
            smoothness,
            sigma,
            noise_multiplier: 1.0,
            theta_star: vec![0.0; dim],
            optimum: 0.0,
            theta_init: vec![0.0; dim],
            data: Data::Logistic { features, labels, reg },
        };
        let mut theta = vec![0.0; dim];
        let mut grad = vec![0.0; dim];
        for _ in 0..1_000_000 {
            problem.gradient(&theta, &mut grad);
            if norm_sq(&grad).sqrt() < 1e-12 {
                break;
            }
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= g / smoothness;
            }
        }
        problem.optimum = problem.loss(&theta);
        problem.theta_star = theta;
        problem.theta_init = planted.iter().map(|p| -p).collect();
        Ok(problem)
    }

    /// Copy whose actual gradient noise is `factor` times the declared `σ`
    /// (additive-noise kinds only). Used as a negative control.
    pub fn with_noise_multiplier(mut self, factor: f64) -> Result<Self> {
        if self.kind == ProblemKind::LogisticSynthetic {
            return Err(invalid("noise multiplier applies to additive-noise problems only"));
        }
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(invalid("noise multiplier must be >= 0"));
        }
        self.noise_multiplier = factor;
        Ok(self)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn theta_init(&self) -> &[f64] {
        &self.theta_init
    }

    pub fn optimum(&self) -> f64 {
        self.optimum
    }

    pub fn is_convex(&self) -> bool {
        match &self.data {
            Data::Sinusoidal { a, c } => c <= a,
            _ => true,
        }
    }

    /// `‖θ_1 − θ*‖`.
    pub fn initial_distance(&self) -> f64 {
        self.theta_init
            .iter()
            .zip(&self.theta_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `L(θ_1) − L(θ*)`.
    pub fn initial_gap(&self) -> f64 {
        self.loss(&self.theta_init) - self.optimum
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        match &self.data {
            Data::Quadratic { curvature } => theta
                .iter()
                .zip(&self.theta_star)
                .zip(curvature)
                .map(|((t, s), a)| 0.5 * a * (t - s) * (t - s))
                .sum(),
            Data::Sinusoidal { a, c } => theta.iter().map(|t| 0.5 * a * t * t + c * t.cos()).sum(),
            Data::Logistic { features, labels, reg } => {
                let n = labels.len() as f64;
                let data: f64 = features
                    .chunks_exact(self.dim)
                    .zip(labels)
                    .map(|(x, y)| softplus(-y * dot(x, theta)))
                    .sum();
                data / n + 0.5 * reg * norm_sq(theta)
            }
        }
    }

    /// Full gradient `∇L(θ)` into `out`.
    pub fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        match &self.data {
            Data::Quadratic { curvature } => {
                for k in 0..self.dim {
                    out[k] = curvature[k] * (theta[k] - self.theta_star[k]);
                }
            }
            Data::Sinusoidal { a, c } => {
                for k in 0..self.dim {
                    out[k] = a * theta[k] - c * theta[k].sin();
                }
            }
            Data::Logistic { features, labels, reg } => {
                let n = labels.len() as f64;
                for k in 0..self.dim {
                    out[k] = reg * theta[k];
                }
                for (x, y) in features.chunks_exact(self.dim).zip(labels) {
                    let w = logistic_weight(x, *y, theta) / n;
                    for k in 0..self.dim {
                        out[k] += w * x[k];
                    }
                }
            }
        }
    }

    pub fn gradient_norm_sq(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dim];
        self.gradient(theta, &mut g);
        norm_sq(&g)
    }

    /// Sum of `batch` independent per-sample stochastic gradients at `theta`,
    /// written into `out`. Each per-sample gradient is unbiased.
    pub fn gradient_sum(&self, theta: &[f64], batch: usize, rng: &mut RngStream, out: &mut [f64]) {
        if batch == 0 {
            out.iter_mut().for_each(|g| *g = 0.0);
            return;
        }
        match &self.data {
            Data::Quadratic { .. } | Data::Sinusoidal { .. } => {
                self.gradient(theta, out);
                // A sum of b isotropic Gaussians with E‖z‖² = σ² each.
                let scale = self.noise_multiplier * self.sigma * (batch as f64 / self.dim as f64).sqrt();
                for g in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *g = *g * batch as f64 + scale * z;
                }
            }
            Data::Logistic { features, labels, reg } => {
                for k in 0..self.dim {
                    out[k] = batch as f64 * reg * theta[k];
                }
                for _ in 0..batch {
                    let j = rng.next_index(labels.len());
                    let x = &features[j * self.dim..(j + 1) * self.dim];
                    let w = logistic_weight(x, labels[j], theta);
                    for k in 0..self.dim {
                        out[k] += w * x[k];
                    }
                }
            }
        }
    }
}

fn check_common(dim: usize, smoothness: f64, sigma: f64) -> Result<()> {
    if dim == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if !(smoothness.is_finite() && smoothness > 0.0) {
        return Err(invalid(format!("smoothness must be > 0, got {smoothness}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

// d/dz of softplus(-y z) times -y, i.e. the scalar factor of x in ∇ℓ.
fn logistic_weight(x: &[f64], y: f64, theta: &[f64]) -> f64 {
    -y * sigmoid(-y * dot(x, theta))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

// Largest eigenvalue of XᵀX for row-major X with `dim` columns.
fn power_iteration(features: &[f64], dim: usize) -> f64 {
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut w = vec![0.0; dim];
        for x in features.chunks_exact(dim) {
            let s = dot(x, &v);
            for k in 0..dim {
                w[k] += s * x[k];
            }
        }
        let norm = norm_sq(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = dot(&w, &v);
        v = w.into_iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-13 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}
