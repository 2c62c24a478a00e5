//! Per-run trace files and their schema check.
//!
//! Columns, in order:
//!
//! | column | content |
//! |---|---|
//! | `episode` | 1-based episode index, consecutive from 1 |
//! | `optimistic_gap_s1` | the learner's own gap at `s₁` (`V̄₁ − V̲₁` or `Ṽ₁` for exploration) |
//! | `cumulative_optimistic_gap` | running sum of the previous column |
//! | `exact_nash_gap` | exact gap of the deployed policy at evaluation points, blank elsewhere |
//! | `wall_clock_ns` | nanoseconds since the run started, blank unless timing is on |
//!
//! Floats are written in shortest round-trip form.

use std::io::{Read, Write};
use std::path::Path;

use crate::run_log::RunLog;

use super::HarnessError;

pub const TRACE_COLUMNS: [&str; 5] =
    ["episode", "optimistic_gap_s1", "cumulative_optimistic_gap", "exact_nash_gap", "wall_clock_ns"];

/// One parsed trace row.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub optimistic_gap: f64,
    pub cumulative_gap: f64,
    pub exact_gap: Option<f64>,
    pub wall_clock_ns: Option<u64>,
}

pub fn write_trace<W: Write>(out: W, log: &RunLog, wall_clock_ns: Option<&[u64]>) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    let mut total = 0.0;
    for (i, r) in log.records.iter().enumerate() {
        total += r.optimistic_gap;
        let exact = r.exact_gap.map(|g| g.to_string()).unwrap_or_default();
        let clock = wall_clock_ns.and_then(|t| t.get(i)).map(|t| t.to_string()).unwrap_or_default();
        w.write_record([r.episode.to_string(), r.optimistic_gap.to_string(), total.to_string(), exact, clock])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace(path: &Path, log: &RunLog, wall_clock_ns: Option<&[u64]>) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path)?;
    write_trace(std::io::BufWriter::new(file), log, wall_clock_ns)
}

fn schema(path: &str, line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Schema { file: path.into(), line, msg: msg.into() }
}

fn parse_f64(field: &str, name: &str, path: &str, line: usize) -> Result<f64, HarnessError> {
    let v: f64 = field.parse().map_err(|_| schema(path, line, format!("{name} is not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(schema(path, line, format!("{name} is not finite")));
    }
    Ok(v)
}

/// Parses a trace and checks every schema rule: exact header, consecutive
/// episodes from 1, finite nonnegative gaps, a running sum that matches,
/// and blank-or-valid optional columns.
pub fn read_trace<R: Read>(input: R, name: &str) -> Result<Vec<TraceRow>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TRACE_COLUMNS) {
        return Err(schema(name, 1, format!("header {:?} differs from {:?}", header.iter().collect::<Vec<_>>(), TRACE_COLUMNS)));
    }
    let mut rows = Vec::new();
    let mut total = 0.0;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != TRACE_COLUMNS.len() {
            return Err(schema(name, line, format!("expected {} fields, got {}", TRACE_COLUMNS.len(), rec.len())));
        }
        let episode: usize = rec[0].parse().map_err(|_| schema(name, line, "episode is not an integer"))?;
        if episode != i + 1 {
            return Err(schema(name, line, format!("episode {episode} out of order")));
        }
        let optimistic_gap = parse_f64(&rec[1], "optimistic_gap_s1", name, line)?;
        if optimistic_gap < 0.0 {
            return Err(schema(name, line, "optimistic gap is negative"));
        }
        let cumulative_gap = parse_f64(&rec[2], "cumulative_optimistic_gap", name, line)?;
        total += optimistic_gap;
        if (cumulative_gap - total).abs() > 1e-9 * (1.0 + total.abs()) {
            return Err(schema(name, line, format!("running sum {cumulative_gap} should be {total}")));
        }
        let exact_gap = match &rec[3] {
            "" => None,
            f => Some(parse_f64(f, "exact_nash_gap", name, line)?),
        };
        if exact_gap.is_some_and(|g| g < -1e-6) {
            return Err(schema(name, line, "exact gap is negative"));
        }
        let wall_clock_ns = match &rec[4] {
            "" => None,
            f => Some(f.parse::<u64>().map_err(|_| schema(name, line, "wall_clock_ns is not an integer"))?),
        };
        rows.push(TraceRow { episode, optimistic_gap, cumulative_gap, exact_gap, wall_clock_ns });
    }
    if rows.is_empty() {
        return Err(schema(name, 2, "trace has no data rows"));
    }
    Ok(rows)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>, HarnessError> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file), &path.display().to_string())
}

/// Schema-checks every `*.csv` trace in `dir`; returns the number of files checked.
pub fn validate_dir(dir: &Path) -> Result<usize, HarnessError> {
    let mut n = 0;
    for path in trace_files(dir)? {
        load_trace(&path)?;
        n += 1;
    }
    Ok(n)
}

pub(crate) fn trace_files(dir: &Path) -> Result<Vec<std::path::PathBuf>, HarnessError> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.is_file())
        .collect();
    files.sort();
    Ok(files)
}
