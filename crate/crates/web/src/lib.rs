//! WebAssembly bindings for the browser demo in `www/`.

use dropcompute::analytic::{expected_completed, expected_speedup, optimal_threshold_analytic, GaussianStepModel};
use dropcompute::latency::{FleetSpec, NoiseMode, NoiseSpec, WorkerLatencyModel};
use dropcompute::sim::{self, scale_sweep, SimConfig, ThresholdPolicy};
use dropcompute::threshold::select_threshold;
use wasm_bindgen::prelude::*;

/// Speedup curve plus its best threshold. `points` holds rows of
/// `[tau, s_eff, drop_rate]`.
#[wasm_bindgen]
#[derive(Clone, Debug)]
pub struct Curve {
    tau_star: f64,
    s_eff_star: f64,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl Curve {
    #[wasm_bindgen(getter)]
    pub fn tau_star(&self) -> f64 {
        self.tau_star
    }

    #[wasm_bindgen(getter)]
    pub fn s_eff_star(&self) -> f64 {
        self.s_eff_star
    }

    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

fn fleet(noise: &str, base: f64, spread: f64, workers: usize) -> Result<FleetSpec, String> {
    let model = match noise {
        "normal" => WorkerLatencyModel::new(
            base,
            NoiseSpec::normal(0.0, spread).map_err(|e| e.to_string())?,
            NoiseMode::AdditiveAbsolute,
        ),
        "heavy_tail" => WorkerLatencyModel::new(base, NoiseSpec::heavy_tail_delay(), NoiseMode::AdditiveScaledByMean),
        other => return Err(format!("unknown noise model {other:?}")),
    };
    FleetSpec::homogeneous(workers, model.map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

pub fn analytic_curve_impl(
    mu: f64,
    sigma: f64,
    micro_batches: usize,
    workers: usize,
    comm_time: f64,
    samples: usize,
) -> Result<Curve, String> {
    let model = GaussianStepModel::new(mu, sigma, micro_batches, workers, comm_time).map_err(|e| e.to_string())?;
    let tau_star = optimal_threshold_analytic(mu, sigma, micro_batches, comm_time).map_err(|e| e.to_string())?;
    let m = micro_batches as f64;
    let (lo, hi) = (0.6 * m * mu, m * mu + 4.0 * m.sqrt() * sigma);
    let samples = samples.max(2);
    let mut points = Vec::with_capacity(3 * samples);
    for k in 0..samples {
        let tau = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
        let s = expected_speedup(&model, tau, None).map_err(|e| e.to_string())?;
        let done = expected_completed(mu, sigma, micro_batches, tau).map_err(|e| e.to_string())?;
        points.extend([tau, s, 1.0 - done / m]);
    }
    let s_eff_star = expected_speedup(&model, tau_star, None).map_err(|e| e.to_string())?;
    Ok(Curve {
        tau_star,
        s_eff_star,
        points,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn simulated_curve_impl(
    noise: &str,
    base: f64,
    spread: f64,
    micro_batches: usize,
    workers: usize,
    comm_time: f64,
    iterations: usize,
    seed: u64,
) -> Result<Curve, String> {
    let cfg = SimConfig::new(fleet(noise, base, spread, workers)?, micro_batches, comm_time, iterations, seed)
        .map_err(|e| e.to_string())?;
    let trace = sim::sample_trace(&cfg).map_err(|e| e.to_string())?;
    let result = select_threshold(&trace, None).map_err(|e| e.to_string())?;
    let points = result.curve.iter().flat_map(|p| [p.tau, p.s_eff, p.drop_rate]).collect();
    Ok(Curve {
        tau_star: result.tau_star,
        s_eff_star: result.s_eff_star,
        points,
    })
}

/// Rows of `[workers, s_eff, baseline_efficiency, drop_rate]` for
/// `workers = 2, 4, ..., max_workers`.
#[allow(clippy::too_many_arguments)]
pub fn scale_curve_impl(
    noise: &str,
    base: f64,
    spread: f64,
    micro_batches: usize,
    comm_time: f64,
    max_workers: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    let ns: Vec<usize> = std::iter::successors(Some(2usize), |n| Some(n * 2))
        .take_while(|&n| n <= max_workers)
        .collect();
    if ns.is_empty() {
        return Err("max_workers must be at least 2".into());
    }
    let cfg = SimConfig::new(fleet(noise, base, spread, 1)?, micro_batches, comm_time, iterations, seed)
        .map_err(|e| e.to_string())?;
    let policy = ThresholdPolicy::Auto {
        warmup_iterations: iterations.clamp(20, 200),
    };
    let points = scale_sweep(&cfg, &ns, &policy).map_err(|e| e.to_string())?;
    Ok(points
        .iter()
        .flat_map(|p| [p.workers as f64, p.s_eff, p.baseline_efficiency, p.drop_rate])
        .collect())
}

/// Closed-form speedup curve for Gaussian micro-batch latencies.
#[wasm_bindgen]
pub fn analytic_curve(
    mu: f64,
    sigma: f64,
    micro_batches: usize,
    workers: usize,
    comm_time: f64,
    samples: usize,
) -> Result<Curve, JsError> {
    analytic_curve_impl(mu, sigma, micro_batches, workers, comm_time, samples).map_err(|e| JsError::new(&e))
}

/// Sample a latency trace and pick the threshold on it.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulated_curve(
    noise: &str,
    base: f64,
    spread: f64,
    micro_batches: usize,
    workers: usize,
    comm_time: f64,
    iterations: usize,
    seed: u64,
) -> Result<Curve, JsError> {
    simulated_curve_impl(noise, base, spread, micro_batches, workers, comm_time, iterations, seed)
        .map_err(|e| JsError::new(&e))
}

/// Speedup and baseline efficiency as the worker count doubles.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn scale_curve(
    noise: &str,
    base: f64,
    spread: f64,
    micro_batches: usize,
    comm_time: f64,
    max_workers: usize,
    iterations: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    scale_curve_impl(noise, base, spread, micro_batches, comm_time, max_workers, iterations, seed)
        .map_err(|e| JsError::new(&e))
}
