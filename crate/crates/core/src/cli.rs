//! `dropsim` command-line driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::error::Error;
use crate::io::config::{parse_config, ScaleSweepConfig, SgdBenchConfig, SimulateConfig};
use crate::io::{self, content_hash, provenance_line, write_atomic};
use crate::sgd::{self, BatchSchedule, BoundCheck, SgdProblem};
use crate::sim::{self, local_sgd_run, scale_sweep, ThresholdPolicy};
use crate::threshold::select_threshold;

#[derive(Debug, Parser)]
#[command(name = "dropsim", version, about = "Compute-threshold dropping simulator for synchronous data-parallel training")]
#[command(after_help = "Set DROPSIM_THREADS to cap worker threads. Exit code 2 means invalid input.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMode {
    /// Synchronous iterations with optional threshold.
    Sync,
    /// Local-SGD step times with stragglers.
    LocalSgd,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate iterations; writes iterations.csv and summary.json.
    ///
    /// Config keys: fleet, micro_batches, comm_time (0), tau (seconds | "auto" |
    /// "none", default none), iterations, seed (0), warmup_iterations (100),
    /// stop_at_accumulation_boundary (false), local_sgd (for --mode local-sgd).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = SimMode::Sync)]
        mode: SimMode,
    },
    /// Choose the threshold maximising effective speedup over a latency trace;
    /// writes curve.csv and summary.json.
    SelectThreshold {
        /// CSV `iteration,worker,micro_batch,latency_seconds`.
        #[arg(long)]
        trace: PathBuf,
        /// CSV `iteration,T_c_seconds`; communication time is 0 when omitted.
        #[arg(long)]
        comm: Option<PathBuf>,
        /// CSV with a single `tau` column; derived from the trace when omitted.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Accepted for uniformity; selection is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Throughput and effective speedup over worker counts; writes scale.csv
    /// and summary.json.
    ///
    /// Config keys: fleet, n_list (strictly ascending), micro_batches,
    /// comm_time (0), tau (default none), iterations, seed (0),
    /// warmup_iterations (100).
    ScaleSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Verify the stochastic-batch convergence bounds; writes report.json and
    /// report.csv.
    ///
    /// Defaults: quadratic d=10 L=1 σ=1 and sinusoidal d=10 (a=1, c=2),
    /// 8 workers x 4 micro-batches, p_drops [0, 0.05, 0.1, 0.2],
    /// ks [1e4, 1e5], 100 seeds.
    SgdBench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of seeds per cell.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Input problems: exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct InputError(String);

fn input_err(e: Error) -> anyhow::Error {
    match e {
        Error::Io(e) => anyhow::Error::new(e),
        other => InputError(other.to_string()).into(),
    }
}

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    parse_config(&read_text(path)?, &path.display().to_string()).map_err(input_err)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn hash_of(value: &impl Serialize) -> anyhow::Result<String> {
    Ok(content_hash(&serde_json::to_vec(value)?))
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path, mode: SimMode) -> anyhow::Result<()> {
    let mut cfg: SimulateConfig = load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let hash = hash_of(&cfg)?;
    let prov = provenance_line(&hash);
    if mode == SimMode::LocalSgd {
        let results = cfg
            .local_sgd_configs()
            .and_then(|cfgs| cfgs.iter().map(local_sgd_run).collect::<crate::Result<Vec<_>>>())
            .map_err(input_err)?;
        let mut w = csv::Writer::from_writer(prov.clone().into_bytes());
        w.write_record(["sync_period", "local_sgd_speedup", "dropcompute_speedup", "drop_rate", "tau"])?;
        for r in &results {
            w.write_record([
                r.sync_period.to_string(),
                r.local_sgd_speedup.to_string(),
                r.dropcompute_speedup.to_string(),
                r.drop_rate.to_string(),
                r.tau.to_string(),
            ])?;
        }
        write_bytes(&out.join("local_sgd.csv"), &w.into_inner()?)?;
        write_json(&out.join("summary.json"), &json!({ "config_hash": hash, "local_sgd": results }))?;
        for r in &results {
            println!(
                "H={} local_sgd_speedup={:.4} dropcompute_speedup={:.4}",
                r.sync_period, r.local_sgd_speedup, r.dropcompute_speedup
            );
        }
        return Ok(());
    }

    let mut sim_cfg = cfg.sim_config().map_err(input_err)?;
    sim_cfg.tau = match cfg.policy() {
        ThresholdPolicy::None => None,
        ThresholdPolicy::Fixed { tau } => Some(tau),
        ThresholdPolicy::Auto { warmup_iterations } => {
            let trace = sim::warmup_trace(&sim_cfg, warmup_iterations).map_err(input_err)?;
            Some(select_threshold(&trace, None).map_err(input_err)?.tau_star)
        }
    };
    let records = sim::run_records(&sim_cfg).map_err(input_err)?;
    let stats = sim::summarize(&records, sim_cfg.tau);
    write_bytes(&out.join("iterations.csv"), &io::iterations_csv(&records, Some(&prov))?)?;
    write_json(&out.join("summary.json"), &json!({ "config_hash": hash, "stats": stats }))?;
    println!(
        "tau={} s_eff={:.6} drop_rate={:.6} baseline_step={:.6} drop_step={:.6}",
        stats.tau.map_or("none".to_string(), |t| t.to_string()),
        stats.s_eff,
        stats.drop_rate,
        stats.mean_baseline_step,
        stats.mean_drop_step
    );
    Ok(())
}

fn select(trace: &Path, comm: Option<&Path>, grid: Option<&Path>, out: &Path) -> anyhow::Result<()> {
    let trace_bytes = fs::read(trace).with_context(|| format!("reading {}", trace.display()))?;
    let comm_bytes = match comm {
        Some(p) => Some(fs::read(p).with_context(|| format!("reading {}", p.display()))?),
        None => {
            eprintln!("warning: no --comm file given, communication time defaults to 0");
            None
        }
    };
    let grid_values = match grid {
        Some(p) => Some(io::read_grid(read_text(p)?.as_bytes()).map_err(input_err)?),
        None => None,
    };
    let tensor = io::read_trace(trace_bytes.as_slice(), comm_bytes.as_deref()).map_err(input_err)?;
    let result = select_threshold(&tensor, grid_values.as_deref()).map_err(input_err)?;

    let mut all = trace_bytes.clone();
    all.extend(comm_bytes.unwrap_or_default());
    all.extend(serde_json::to_vec(&grid_values)?);
    let hash = content_hash(&all);
    write_bytes(&out.join("curve.csv"), &io::curve_csv(&result, Some(&provenance_line(&hash)))?)?;
    write_json(
        &out.join("summary.json"),
        &json!({
            "config_hash": hash,
            "tau_star": result.tau_star,
            "s_eff_star": result.s_eff_star,
            "grid_points": result.curve.len(),
        }),
    )?;
    println!("tau_star={} s_eff={:.6}", result.tau_star, result.s_eff_star);
    Ok(())
}

fn sweep(config: &Path, seed: Option<u64>, out: &Path) -> anyhow::Result<()> {
    let mut cfg: ScaleSweepConfig = load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let hash = hash_of(&cfg)?;
    let template = cfg.template().map_err(input_err)?;
    let points = scale_sweep(&template, &cfg.n_list, &cfg.policy()).map_err(input_err)?;
    write_bytes(&out.join("scale.csv"), &io::scale_csv(&points, Some(&provenance_line(&hash)))?)?;
    write_json(&out.join("summary.json"), &json!({ "config_hash": hash, "points": points }))?;
    for p in &points {
        println!("N={} s_eff={:.4} baseline_per_worker={:.4}", p.workers, p.s_eff, p.baseline_efficiency);
    }
    Ok(())
}

fn sgd_bench(config: Option<&Path>, seed: Option<u64>, seeds: Option<usize>, out: &Path) -> anyhow::Result<()> {
    let mut cfg: SgdBenchConfig = match config {
        Some(p) => load(p)?,
        None => SgdBenchConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(seeds) = seeds {
        cfg.seeds = seeds;
    }
    let hash = hash_of(&cfg)?;
    let q = &cfg.quadratic;
    let s = &cfg.sinusoidal;
    let quadratic = SgdProblem::quadratic(q.dim, q.smoothness, q.sigma, q.distance)
        .and_then(|p| p.with_noise_multiplier(cfg.noise_multiplier))
        .map_err(input_err)?;
    let sinusoidal = SgdProblem::sinusoidal(s.dim, s.a, s.c, s.sigma, s.start)
        .and_then(|p| p.with_noise_multiplier(cfg.noise_multiplier))
        .map_err(input_err)?;
    let mut reports = Vec::new();
    for &p_drop in &cfg.p_drops {
        let schedule = BatchSchedule::bernoulli(cfg.workers, cfg.micro_batches, cfg.micro_batch_size, p_drop)
            .map_err(input_err)?;
        for &k in &cfg.ks {
            let check = BoundCheck::new(k, cfg.seeds, cfg.seed);
            reports.push(sgd::verify_convex_bound(&quadratic, &schedule, &check).map_err(input_err)?);
            reports.push(sgd::verify_nonconvex_bound(&sinusoidal, &schedule, &check).map_err(input_err)?);
        }
    }
    let all_pass = reports.iter().all(|r| r.pass);
    let note = (cfg.seeds < 2).then_some("insufficient seeds for statistical claims");
    write_bytes(&out.join("report.csv"), &io::margin_csv(&reports, Some(&provenance_line(&hash)))?)?;
    write_json(
        &out.join("report.json"),
        &json!({ "config_hash": hash, "all_pass": all_pass, "note": note, "cells": reports }),
    )?;
    for r in &reports {
        println!(
            "{} {} K={} empirical={:.3e} bound={:.3e} {}",
            r.problem,
            r.schedule,
            r.k,
            r.empirical,
            r.bound,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    if let Some(note) = note {
        eprintln!("note: {note}");
    }
    println!("{}", if all_pass { "ALL PASS" } else { "SOME CELLS FAIL" });
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    #[cfg(feature = "parallel")]
    if let Ok(raw) = std::env::var("DROPSIM_THREADS") {
        let threads: usize = raw
            .parse()
            .map_err(|_| InputError(format!("DROPSIM_THREADS must be a positive integer, got `{raw}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global()?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let out = match &cli.command {
        Command::Simulate { out, .. }
        | Command::SelectThreshold { out, .. }
        | Command::ScaleSweep { out, .. }
        | Command::SgdBench { out, .. } => out.clone(),
    };
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Simulate { config, seed, out, mode } => simulate(&config, seed, &out, mode),
        Command::SelectThreshold { trace, comm, grid, out, .. } => select(&trace, comm.as_deref(), grid.as_deref(), &out),
        Command::ScaleSweep { config, seed, out } => sweep(&config, seed, &out),
        Command::SgdBench { config, seed, seeds, out } => sgd_bench(config.as_deref(), seed, seeds, &out),
    }
}

/// Parse arguments, run, and map failures to exit codes (2 for invalid input).
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<InputError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
