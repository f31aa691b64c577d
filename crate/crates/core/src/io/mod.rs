//! File formats: latency traces, communication times, threshold grids and
//! result tables as CSV; configurations and summaries as JSON.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sim::{IterationRecord, ScalePoint};
use crate::sgd::MarginReport;
use crate::threshold::{ThresholdSearchResult, TraceTensor};

pub const TRACE_HEADER: [&str; 4] = ["iteration", "worker", "micro_batch", "latency_seconds"];
pub const COMM_HEADER: [&str; 2] = ["iteration", "T_c_seconds"];
pub const CURVE_HEADER: [&str; 4] = ["tau", "s_eff", "drop_rate", "step_speedup"];
pub const ITERATION_HEADER: [&str; 5] = ["iteration", "worker", "T_n", "stop_time", "completed"];
pub const SCALE_HEADER: [&str; 8] = [
    "N",
    "throughput_base",
    "throughput_drop",
    "S_eff",
    "linear_ref",
    "analytic_s_eff",
    "tau",
    "drop_rate",
];

/// Hex SHA-256 of `bytes`.
pub fn content_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Comment line written at the top of every output CSV.
pub fn provenance_line(config_hash: &str) -> String {
    format!("# dropsim {} config_hash={config_hash}\n", env!("CARGO_PKG_VERSION"))
}

/// Write `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(input)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Trace(format!(
            "{what}: expected header `{}`, found `{}`",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Trace(format!("{what} line {line}: cannot parse `{raw}`")))
}

fn positive_time(value: f64, line: u64, what: &str, allow_zero: bool) -> Result<f64> {
    let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
    if ok {
        Ok(value)
    } else {
        Err(Error::Trace(format!("{what} line {line}: invalid time {value}")))
    }
}

/// Latencies of a trace CSV, indexed 0-based and required to be rectangular.
/// Returns `(iterations, workers, micro_batches, latencies)`.
pub fn read_latencies<R: Read>(input: R) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &TRACE_HEADER, "trace")?;
    let mut cells = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let key: (usize, usize, usize) = (
            field(&record, 0, "trace")?,
            field(&record, 1, "trace")?,
            field(&record, 2, "trace")?,
        );
        let t = positive_time(field(&record, 3, "trace")?, line, "trace", false)?;
        if cells.insert(key, t).is_some() {
            return Err(Error::Trace(format!("trace line {line}: duplicate entry {key:?}")));
        }
    }
    if cells.is_empty() {
        return Err(Error::Trace("trace is empty".into()));
    }
    let dims = cells
        .keys()
        .fold((0, 0, 0), |acc, k| (acc.0.max(k.0 + 1), acc.1.max(k.1 + 1), acc.2.max(k.2 + 1)));
    if cells.len() != dims.0 * dims.1 * dims.2 {
        return Err(Error::Trace(format!(
            "ragged trace: {} entries for a {}x{}x{} tensor",
            cells.len(),
            dims.0,
            dims.1,
            dims.2
        )));
    }
    // BTreeMap iterates in (iteration, worker, micro_batch) order.
    Ok((dims.0, dims.1, dims.2, cells.into_values().collect()))
}

/// Per-iteration communication times; every iteration in `0..iterations` must appear once.
pub fn read_comm_times<R: Read>(input: R, iterations: usize) -> Result<Vec<f64>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &COMM_HEADER, "comm")?;
    let mut times = vec![None; iterations];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let i: usize = field(&record, 0, "comm")?;
        let t = positive_time(field(&record, 1, "comm")?, line, "comm", true)?;
        let slot = times
            .get_mut(i)
            .ok_or_else(|| Error::Trace(format!("comm line {line}: iteration {i} not in trace")))?;
        if slot.replace(t).is_some() {
            return Err(Error::Trace(format!("comm line {line}: duplicate iteration {i}")));
        }
    }
    times
        .into_iter()
        .enumerate()
        .map(|(i, t)| t.ok_or_else(|| Error::Trace(format!("comm: missing iteration {i}"))))
        .collect()
}

/// Assemble a trace from its CSV inputs; without communication times `T_c = 0`.
pub fn read_trace<R: Read, C: Read>(trace: R, comm: Option<C>) -> Result<TraceTensor> {
    let (i, n, m, latencies) = read_latencies(trace)?;
    let comm_times = match comm {
        Some(c) => read_comm_times(c, i)?,
        None => vec![0.0; i],
    };
    TraceTensor::new(i, n, m, latencies, comm_times)
}

/// Threshold grid: a single `tau` column.
pub fn read_grid<R: Read>(input: R) -> Result<Vec<f64>> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &["tau"], "grid")?;
    rdr.records()
        .map(|r| {
            let r = r?;
            field(&r, 0, "grid")
        })
        .collect()
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(prefix: Option<&str>, wtr: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    let body = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    let mut out = prefix.map(|p| p.as_bytes().to_vec()).unwrap_or_default();
    out.extend(body);
    Ok(out)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn trace_csv(trace: &TraceTensor, provenance: Option<&str>) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut lat = writer();
    lat.write_record(TRACE_HEADER)?;
    for i in 0..trace.iterations() {
        for n in 0..trace.workers() {
            for m in 0..trace.micro_batches() {
                lat.write_record([i.to_string(), n.to_string(), m.to_string(), num(trace.latency(i, n, m))])?;
            }
        }
    }
    let mut comm = writer();
    comm.write_record(COMM_HEADER)?;
    for (i, t) in trace.comm_times().iter().enumerate() {
        comm.write_record([i.to_string(), num(*t)])?;
    }
    Ok((finish(provenance, lat)?, finish(provenance, comm)?))
}

pub fn curve_csv(result: &ThresholdSearchResult, provenance: Option<&str>) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(CURVE_HEADER)?;
    for p in &result.curve {
        w.write_record([num(p.tau), num(p.s_eff), num(p.drop_rate), num(p.step_speedup)])?;
    }
    finish(provenance, w)
}

pub fn iterations_csv(records: &[IterationRecord], provenance: Option<&str>) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(ITERATION_HEADER)?;
    for r in records {
        for n in 0..r.compute_times.len() {
            w.write_record([
                r.iteration.to_string(),
                n.to_string(),
                num(r.compute_times[n]),
                num(r.stop_times[n]),
                r.completed[n].to_string(),
            ])?;
        }
    }
    finish(provenance, w)
}

pub fn scale_csv(points: &[ScalePoint], provenance: Option<&str>) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(SCALE_HEADER)?;
    for p in points {
        w.write_record([
            p.workers.to_string(),
            num(p.baseline_throughput),
            num(p.drop_throughput),
            num(p.s_eff),
            num(p.linear_ref),
            p.analytic_s_eff.map(num).unwrap_or_default(),
            p.tau.map(num).unwrap_or_default(),
            num(p.drop_rate),
        ])?;
    }
    finish(provenance, w)
}

pub fn margin_csv(reports: &[MarginReport], provenance: Option<&str>) -> Result<Vec<u8>> {
    let mut w = writer();
    w.write_record(["problem", "schedule", "K", "seeds", "empirical", "bound", "margin", "pass"])?;
    for r in reports {
        w.write_record([
            r.problem.clone(),
            r.schedule.clone(),
            r.k.to_string(),
            r.seeds.to_string(),
            num(r.empirical),
            num(r.bound),
            num(r.margin),
            r.pass.to_string(),
        ])?;
    }
    finish(provenance, w)
}
