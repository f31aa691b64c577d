use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::problem::SgdProblem;
use super::schedule::BatchSchedule;
use super::train::{run_stochastic_sgd, theorem_eta, EtaMode, Normalization};
use crate::error::{invalid, Result};
use crate::par;
use crate::stats::{mean_variance, stream_id, RngStream};

const SGD_DOMAIN: u64 = 0x7367_6464;

/// Settings shared by the bound verifiers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundCheck {
    /// Total samples per run.
    pub k: u64,
    pub seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Multiplier on the theorem step size.
    #[serde(default = "unit")]
    pub eta_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl BoundCheck {
    pub fn new(k: u64, seeds: usize, base_seed: u64) -> Self {
        Self {
            k,
            seeds,
            base_seed,
            eta_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub problem: String,
    pub schedule: String,
    #[serde(rename = "K")]
    pub k: u64,
    pub seeds: usize,
    pub eta: f64,
    /// Mean over seeds of the bounded quantity.
    pub empirical: f64,
    pub std_error: f64,
    pub bound: f64,
    /// `bound − empirical`.
    pub margin: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn describe(schedule: &BatchSchedule) -> String {
    let drop = match schedule.expected_drop_rate() {
        Some(p) => format!("p_drop={p}"),
        None => "timing_driven".to_string(),
    };
    format!("b_max={} {drop}", schedule.b_max())
}

fn seed_stream(check: &BoundCheck, seed: usize) -> RngStream {
    RngStream::new(check.base_seed, stream_id(&[SGD_DOMAIN, seed as u64]))
}

/// Right-hand side of the convex bound: `8 L b_max ‖Δ‖²/K + 6σ‖Δ‖/√K`.
pub fn convex_bound(problem: &SgdProblem, b_max: usize, k: u64) -> f64 {
    let (l, s, dist) = (problem.smoothness(), problem.sigma(), problem.initial_distance());
    let k = k as f64;
    8.0 * l * b_max as f64 * dist * dist / k + 6.0 * s * dist / k.sqrt()
}

/// Right-hand side of the nonconvex bound:
/// `2 L b_max (L(θ_1)−L*)/K + 2σ√(L (L(θ_1)−L*))/√K`.
pub fn nonconvex_bound(problem: &SgdProblem, b_max: usize, k: u64) -> f64 {
    let (l, s, gap) = (problem.smoothness(), problem.sigma(), problem.initial_gap());
    let k = k as f64;
    2.0 * l * b_max as f64 * gap / k + 2.0 * s * (l * gap).sqrt() / k.sqrt()
}

fn report(
    problem: &SgdProblem,
    schedule: &BatchSchedule,
    check: &BoundCheck,
    eta: f64,
    samples: &[f64],
    bound: f64,
) -> MarginReport {
    let (mean, var) = mean_variance(samples);
    let std_error = if samples.len() > 1 {
        (var / samples.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    let note = (check.seeds < 2).then(|| "insufficient seeds for statistical claims".to_string());
    MarginReport {
        problem: format!("{:?}", problem.kind()).to_lowercase(),
        schedule: describe(schedule),
        k: check.k,
        seeds: check.seeds,
        eta,
        empirical: mean,
        std_error,
        bound,
        margin: bound - mean,
        pass: mean <= bound,
        note,
    }
}

fn validate(check: &BoundCheck) -> Result<()> {
    if check.seeds == 0 {
        return Err(invalid("need at least one seed"));
    }
    if !(check.eta_scale > 0.0 && check.eta_scale.is_finite()) {
        return Err(invalid("eta_scale must be > 0"));
    }
    Ok(())
}

/// Mean over seeds of `L(θ̄) − L*` against the convex bound.
pub fn verify_convex_bound(problem: &SgdProblem, schedule: &BatchSchedule, check: &BoundCheck) -> Result<MarginReport> {
    validate(check)?;
    if !problem.is_convex() {
        return Err(invalid("convex bound requires a convex problem"));
    }
    let eta = theorem_eta(EtaMode::ConvexTheorem, problem, schedule.b_max(), check.k) * check.eta_scale;
    let runs = par::map(check.seeds, |s| {
        run_stochastic_sgd(problem, schedule, check.k, EtaMode::Manual { eta }, Normalization::FixedBmax, &mut seed_stream(check, s))
            .map(|t| problem.loss(&t.weighted_average()) - problem.optimum())
    });
    let samples = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(report(problem, schedule, check, eta, &samples, convex_bound(problem, schedule.b_max(), check.k)))
}

/// Mean over seeds of `E‖∇L(θ_sampled)‖²` (exact over the `α`-weighted index
/// draw) against the nonconvex bound.
pub fn verify_nonconvex_bound(problem: &SgdProblem, schedule: &BatchSchedule, check: &BoundCheck) -> Result<MarginReport> {
    validate(check)?;
    let eta = theorem_eta(EtaMode::NonconvexTheorem, problem, schedule.b_max(), check.k) * check.eta_scale;
    let runs = par::map(check.seeds, |s| {
        run_stochastic_sgd(problem, schedule, check.k, EtaMode::Manual { eta }, Normalization::FixedBmax, &mut seed_stream(check, s))
            .map(|t| t.expected_grad_norm_sq(problem))
    });
    let samples = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(report(problem, schedule, check, eta, &samples, nonconvex_bound(problem, schedule.b_max(), check.k)))
}

/// Final-iterate losses `L(θ_S) − L*` of `seeds` independent runs.
pub fn final_losses(
    problem: &SgdProblem,
    schedule: &BatchSchedule,
    check: &BoundCheck,
    eta: EtaMode,
    normalization: Normalization,
) -> Result<Vec<f64>> {
    validate(check)?;
    let runs = par::map(check.seeds, |s| {
        run_stochastic_sgd(problem, schedule, check.k, eta, normalization, &mut seed_stream(check, s))
            .map(|t| problem.loss(&t.final_theta) - problem.optimum())
    });
    runs.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub dof: f64,
    pub p_value: f64,
}

/// Two-sided Welch t-test for equal means.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(invalid("each sample needs at least two observations"));
    }
    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let (m, v) = mean_variance(xs);
        (m, v, n)
    };
    let (ma, va, na) = stats(a);
    let (mb, vb, nb) = stats(b);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb == 0.0 {
        let p_value = if ma == mb { 1.0 } else { 0.0 };
        return Ok(WelchTest { t: 0.0, dof: na + nb - 2.0, p_value });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| invalid(e.to_string()))?;
    Ok(WelchTest {
        t,
        dof,
        p_value: 2.0 * (1.0 - dist.cdf(t.abs())),
    })
}
