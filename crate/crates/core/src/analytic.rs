//! Closed-form step-time and speedup estimators for Gaussian micro-batch
//! latencies: order statistics of the slowest worker, expected completed
//! micro-batches under a threshold, expected effective speedup and the
//! analytic optimal threshold.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::stats::{phi_inv, std_normal_cdf, EULER_GAMMA};

/// Worker compute time is the sum of `micro_batches` i.i.d. latencies with
/// mean `mu` and standard deviation `sigma`, treated as Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianStepModel {
    pub mu: f64,
    pub sigma: f64,
    pub micro_batches: usize,
    pub workers: usize,
    pub comm_time: f64,
}

impl GaussianStepModel {
    pub fn new(mu: f64, sigma: f64, micro_batches: usize, workers: usize, comm_time: f64) -> Result<Self> {
        let m = Self {
            mu,
            sigma,
            micro_batches,
            workers,
            comm_time,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.micro_batches == 0 || self.workers == 0 {
            return Err(invalid("micro_batches and workers must be >= 1"));
        }
        if !(self.comm_time.is_finite() && self.comm_time >= 0.0) {
            return Err(invalid(format!("comm_time must be >= 0, got {}", self.comm_time)));
        }
        Ok(())
    }

    fn mean_compute(&self) -> f64 {
        self.micro_batches as f64 * self.mu
    }
}

/// CDF of the maximum of independent worker times: `Π_n F_n(x)`.
pub fn max_time_cdf<F: Fn(f64) -> f64>(worker_cdfs: &[F], x: f64) -> f64 {
    worker_cdfs.iter().map(|f| f(x)).product()
}

/// Density of the maximum of `n` i.i.d. worker times: `n·f(x)·F(x)^{n-1}`.
pub fn max_time_pdf_iid(pdf: impl Fn(f64) -> f64, cdf: impl Fn(f64) -> f64, n: usize, x: f64) -> f64 {
    assert!(n >= 1, "need at least one worker");
    n as f64 * pdf(x) * cdf(x).powi(n as i32 - 1)
}

/// Expected iteration time `E[T]` including the serial communication time.
///
/// Uses the Gumbel-type interpolation between `Φ⁻¹(1 − 1/N)` and
/// `Φ⁻¹(1 − 1/(eN))` weighted by the Euler–Mascheroni constant. The
/// approximation degenerates at `N = 1`, where the exact value `Mμ + T_c`
/// is returned.
pub fn expected_max_time(model: &GaussianStepModel) -> f64 {
    let base = model.mean_compute() + model.comm_time;
    if model.workers == 1 || model.sigma == 0.0 {
        return base;
    }
    let n = model.workers as f64;
    let z_a = phi_inv(1.0 - 1.0 / n).expect("N >= 2");
    let z_b = phi_inv(1.0 - 1.0 / (std::f64::consts::E * n)).expect("N >= 2");
    let spread = ((model.micro_batches as f64) * model.sigma * model.sigma).sqrt();
    spread * ((1.0 - EULER_GAMMA) * z_a + EULER_GAMMA * z_b) + base
}

/// Expected maximum worker compute time, i.e. `E[T]` without `T_c`.
pub fn expected_max_compute(model: &GaussianStepModel) -> f64 {
    expected_max_time(model) - model.comm_time
}

/// Expected number of micro-batches a worker completes before `tau`:
/// `Σ_m Φ((τ − mμ)/(σ√m))`. With `sigma == 0` the exact count
/// `#{m : mμ < τ}` is returned.
pub fn expected_completed(mu: f64, sigma: f64, micro_batches: usize, tau: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid(format!("mu must be > 0, got {mu}")));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(invalid(format!("tau must be > 0, got {tau}")));
    }
    Ok(completed_sum(mu, sigma, micro_batches, tau))
}

fn completed_sum(mu: f64, sigma: f64, micro_batches: usize, tau: f64) -> f64 {
    (1..=micro_batches)
        .map(|m| {
            let m = m as f64;
            if sigma == 0.0 {
                if m * mu < tau {
                    1.0
                } else {
                    0.0
                }
            } else {
                std_normal_cdf((tau - m * mu) / (m.sqrt() * sigma))
            }
        })
        .sum()
}

/// True when `tau > Mμ/2`, the regime where the completed-count approximation is analysed.
pub fn in_approximation_domain(mu: f64, micro_batches: usize, tau: f64) -> bool {
    tau > micro_batches as f64 * mu / 2.0
}

/// Expected effective speedup at threshold `tau`.
///
/// `measured_max_compute` replaces the Gaussian estimate of the expected
/// slowest-worker compute time with a measured mean (the "given E[T]"
/// variant), which is more accurate for non-Gaussian latencies.
pub fn expected_speedup(
    model: &GaussianStepModel,
    tau: f64,
    measured_max_compute: Option<f64>,
) -> Result<f64> {
    model.validate()?;
    let completed = expected_completed(model.mu, model.sigma, model.micro_batches, tau)?;
    let max_compute = measured_max_compute.unwrap_or_else(|| expected_max_compute(model));
    let tc = model.comm_time;
    Ok(completed / model.micro_batches as f64 * (max_compute + tc) / (tau.min(max_compute) + tc))
}

/// Objective maximised by the analytic optimal threshold: `Σ_m Φ(·) / (τ + T_c)`.
pub fn threshold_objective(mu: f64, sigma: f64, micro_batches: usize, comm_time: f64, tau: f64) -> f64 {
    completed_sum(mu, sigma, micro_batches, tau) / (tau + comm_time)
}

/// Number of log-spaced points in the coarse search for [`optimal_threshold_analytic`].
pub const ANALYTIC_GRID_POINTS: usize = 512;

/// Search interval `[Mμ/2, Mμ + 6√M σ]` used by [`optimal_threshold_analytic`].
pub fn analytic_search_interval(mu: f64, sigma: f64, micro_batches: usize) -> (f64, f64) {
    let m = micro_batches as f64;
    (m * mu / 2.0, m * mu + 6.0 * m.sqrt() * sigma)
}

/// Threshold maximising the expected effective speedup. Independent of the
/// worker count since the `E[T]` factor does not depend on `τ`.
///
/// Coarse scan over [`ANALYTIC_GRID_POINTS`] log-spaced points followed by
/// golden-section refinement inside the bracketing grid cells.
pub fn optimal_threshold_analytic(mu: f64, sigma: f64, micro_batches: usize, comm_time: f64) -> Result<f64> {
    GaussianStepModel::new(mu, sigma, micro_batches, 1, comm_time)?;
    if sigma == 0.0 {
        return Ok(micro_batches as f64 * mu);
    }
    let objective = |tau: f64| threshold_objective(mu, sigma, micro_batches, comm_time, tau);
    let (lo, hi) = analytic_search_interval(mu, sigma, micro_batches);
    let ratio = (hi / lo).ln() / (ANALYTIC_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..ANALYTIC_GRID_POINTS)
        .map(|k| lo * (ratio * k as f64).exp())
        .collect();
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (k, &tau) in grid.iter().enumerate() {
        let v = objective(tau);
        if v > best_val {
            best_val = v;
            best = k;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section_max(objective, a, b, 1e-12);
    Ok(if objective(refined) >= best_val {
        refined
    } else {
        grid[best]
    })
}

fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + a.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{phi_pdf, std_normal_cdf};

    #[test]
    fn max_cdf_product() {
        let uniform = |x: f64| x.clamp(0.0, 1.0);
        assert_eq!(max_time_cdf(&[uniform, uniform], 0.5), 0.25);
        let single = [std_normal_cdf];
        assert_eq!(max_time_cdf(&single, 0.3), std_normal_cdf(0.3));
    }

    #[test]
    fn max_pdf_special_cases() {
        assert_eq!(max_time_pdf_iid(phi_pdf, std_normal_cdf, 1, 0.7), phi_pdf(0.7));
        let v = max_time_pdf_iid(phi_pdf, std_normal_cdf, 2, 0.0);
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn max_pdf_integrates_to_one_and_mode_shifts_right() {
        let mut prev_mode = f64::NEG_INFINITY;
        for n in [1usize, 2, 8, 64, 512] {
            let (lo, hi, steps) = (-10.0, 10.0, 20_000);
            let h = (hi - lo) / steps as f64;
            let mut integral = 0.0;
            let mut mode = (lo, 0.0);
            for k in 0..=steps {
                let x = lo + k as f64 * h;
                let v = max_time_pdf_iid(phi_pdf, std_normal_cdf, n, x);
                let w = if k == 0 || k == steps { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                integral += w * v;
                if v > mode.1 {
                    mode = (x, v);
                }
            }
            integral *= h / 3.0;
            assert!((integral - 1.0).abs() < 1e-4, "n={n}: {integral}");
            assert!(mode.0 >= prev_mode, "mode should move right with n");
            prev_mode = mode.0;
        }
    }

    #[test]
    fn expected_max_degenerate_cases() {
        let m = GaussianStepModel::new(1.0, 0.0, 12, 64, 0.5).unwrap();
        assert_eq!(expected_max_time(&m), 12.5);
        let m = GaussianStepModel::new(1.0, 0.3, 12, 1, 0.5).unwrap();
        assert_eq!(expected_max_time(&m), 12.5);
    }

    #[test]
    fn expected_max_arithmetic() {
        // Hand-expanded: 12 + sqrt(0.12)((1-γ)Φ⁻¹(63/64) + γΦ⁻¹(1 - 1/(64e))).
        let m = GaussianStepModel::new(1.0, 0.1, 12, 64, 0.0).unwrap();
        let z_a = phi_inv(63.0 / 64.0).unwrap();
        let z_b = phi_inv(1.0 - 1.0 / (64.0 * std::f64::consts::E)).unwrap();
        let expected = 12.0 + 0.12f64.sqrt() * ((1.0 - EULER_GAMMA) * z_a + EULER_GAMMA * z_b);
        assert!((expected_max_time(&m) - expected).abs() < 1e-12);
        // Reference quantiles computed independently (scipy.stats.norm.ppf).
        assert!((z_a - 2.153_874_694_061_456).abs() < 1e-9);
        assert!((z_b - 2.527_241_789_320_935).abs() < 1e-9);
        assert!((expected - 12.820_780_090_231_78).abs() < 1e-9);
    }

    #[test]
    fn single_micro_batch_reduces_to_plain_gumbel_form() {
        let m = GaussianStepModel::new(2.0, 0.5, 1, 100, 0.0).unwrap();
        let z_a = phi_inv(1.0 - 1.0 / 100.0).unwrap();
        let z_b = phi_inv(1.0 - 1.0 / (100.0 * std::f64::consts::E)).unwrap();
        let expected = 2.0 + 0.5 * ((1.0 - EULER_GAMMA) * z_a + EULER_GAMMA * z_b);
        assert!((expected_max_time(&m) - expected).abs() < 1e-12);
        assert_eq!(expected_max_compute(&m), expected_max_time(&m));
    }

    #[test]
    fn expected_max_monotone() {
        let base = GaussianStepModel::new(1.0, 0.2, 12, 8, 0.1).unwrap();
        let mut prev = 0.0;
        for n in [2usize, 4, 8, 64, 1024] {
            let v = expected_max_time(&GaussianStepModel { workers: n, ..base });
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for s in [0.0, 0.05, 0.1, 0.5] {
            let v = expected_max_time(&GaussianStepModel { sigma: s, ..base });
            assert!(v >= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for m in [1usize, 2, 12, 64] {
            let v = expected_max_time(&GaussianStepModel { micro_batches: m, ..base });
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn completed_examples() {
        assert_eq!(expected_completed(1.0, 0.0, 2, 1.5).unwrap(), 1.0);
        let v = expected_completed(1.0, 0.1, 12, 12.0).unwrap();
        let oracle: f64 = (1..=11)
            .map(|m| std_normal_cdf((12.0 - m as f64) / (0.1 * (m as f64).sqrt())))
            .sum::<f64>()
            + 0.5;
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 11.498_715_584_109_508).abs() < 1e-9);
        assert_eq!(expected_completed(1.0, 0.1, 12, f64::INFINITY).unwrap(), 12.0);
        assert!(expected_completed(1.0, 0.1, 12, 0.0).is_err());
        assert!(expected_completed(0.0, 0.1, 12, 1.0).is_err());
    }

    #[test]
    fn completed_monotone_in_tau() {
        let mut prev = 0.0;
        for k in 1..400 {
            let tau = k as f64 * 0.05;
            let v = expected_completed(1.0, 0.3, 12, tau).unwrap();
            assert!(v >= prev && v <= 12.0);
            prev = v;
        }
    }

    #[test]
    fn speedup_is_one_without_threshold() {
        let m = GaussianStepModel::new(1.0, 0.1, 12, 64, 0.3).unwrap();
        assert_eq!(expected_speedup(&m, f64::INFINITY, None).unwrap(), 1.0);
        assert_eq!(expected_speedup(&m, f64::INFINITY, Some(13.0)).unwrap(), 1.0);
    }

    #[test]
    fn speedup_increases_with_workers() {
        let tau = 12.2;
        let mut prev = 0.0;
        let mut n = 8;
        while n <= 4096 {
            let m = GaussianStepModel::new(1.0, 0.1, 12, n, 0.0).unwrap();
            let s = expected_speedup(&m, tau, None).unwrap();
            assert!(s > prev, "n={n}");
            prev = s;
            n *= 2;
        }
    }

    #[test]
    fn optimal_threshold_matches_dense_scan() {
        let (mu, sigma, m, tc) = (1.0, 0.1, 12, 1.0);
        let tau = optimal_threshold_analytic(mu, sigma, m, tc).unwrap();
        let (lo, hi) = analytic_search_interval(mu, sigma, m);
        let steps = 10_000;
        let h = (hi - lo) / steps as f64;
        let (mut best_tau, mut best) = (lo, f64::NEG_INFINITY);
        for k in 0..=steps {
            let t = lo + k as f64 * h;
            let v = threshold_objective(mu, sigma, m, tc, t);
            if v > best {
                best = v;
                best_tau = t;
            }
        }
        assert!((tau - best_tau).abs() <= h, "{tau} vs {best_tau}");
        let f = |t| threshold_objective(mu, sigma, m, tc, t);
        assert!(f(tau) >= best - 1e-12);
        assert!(f(tau) >= f(0.9 * tau) && f(tau) >= f(1.1 * tau));
    }

    #[test]
    fn optimal_threshold_small_sigma_limit() {
        assert_eq!(optimal_threshold_analytic(1.0, 0.0, 12, 0.5).unwrap(), 12.0);
        let tau = optimal_threshold_analytic(1.0, 1e-4, 12, 0.5).unwrap();
        assert!((tau - 12.0).abs() < 0.01, "{tau}");
    }
}
