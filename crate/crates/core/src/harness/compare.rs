//! Cross-run aggregation: median and interquartile range of exact gaps.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{load_trace, Algorithm, ExperimentSummary, HarnessError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    /// Exact gap of the deployed policy at a trace checkpoint, one value per seed.
    Trace,
    /// Final output: the output-policy gap per seed, or every planned task gap
    /// of every seed for reward-free runs.
    Output,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub run: String,
    pub algorithm: String,
    pub source: RowSource,
    pub episode: usize,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<ReportRow>,
    /// Checkpoints that some runs of an algorithm have and others lack.
    pub mismatches: Vec<String>,
}

impl CompareReport {
    pub fn rows_for(&self, run: &str, algorithm: &str, source: RowSource) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.run == run && r.algorithm == algorithm && r.source == source).collect()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn row(run: &str, algorithm: Algorithm, source: RowSource, episode: usize, mut values: Vec<f64>) -> ReportRow {
    values.sort_by(f64::total_cmp);
    ReportRow {
        run: run.to_string(),
        algorithm: algorithm.to_string(),
        source,
        episode,
        n: values.len(),
        median: quantile(&values, 0.5),
        q1: quantile(&values, 0.25),
        q3: quantile(&values, 0.75),
    }
}

struct RunData {
    label: String,
    episodes: usize,
    /// algorithm → checkpoint → per-seed exact gaps
    traces: BTreeMap<String, (Algorithm, BTreeMap<usize, Vec<f64>>)>,
    outputs: BTreeMap<String, Vec<f64>>,
}

fn load_run(dir: &Path, mismatches: &mut Vec<String>) -> Result<RunData, HarnessError> {
    let summary = ExperimentSummary::load(dir)?;
    let label = dir.display().to_string();
    let mut traces = BTreeMap::new();
    let mut outputs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in summary.runs.iter().filter(|r| r.error.is_none()) {
        let Some(file) = &run.trace else { continue };
        let rows = load_trace(&dir.join(file))?;
        let points: BTreeMap<usize, f64> = rows.iter().filter_map(|r| r.exact_gap.map(|g| (r.episode, g))).collect();
        let key = run.algorithm.to_string();
        let entry = traces.entry(key.clone()).or_insert_with(|| (run.algorithm, BTreeMap::<usize, Vec<f64>>::new()));
        entry.1.entry(usize::MAX).or_default().push(run.seed as f64);
        for (ep, g) in points {
            entry.1.entry(ep).or_default().push(g);
        }
        let out = outputs.entry(key).or_default();
        match run.output_gap {
            Some(g) => out.push(g),
            None => out.extend(&run.planned_task_gaps),
        }
    }
    // keep only checkpoints every seed reached
    for (name, (_, points)) in traces.iter_mut() {
        let seeds = points.remove(&usize::MAX).map_or(0, |s| s.len());
        points.retain(|ep, gaps| {
            if gaps.len() != seeds {
                mismatches.push(format!("{label}: {name} checkpoint {ep} present in {} of {seeds} seeds", gaps.len()));
            }
            gaps.len() == seeds
        });
    }
    Ok(RunData { label, episodes: summary.config.episodes, traces, outputs })
}

/// Aggregates runs written by `run_experiment`. Trace rows use only the
/// checkpoints shared by every run of that algorithm; the rest are listed in
/// `mismatches`.
pub fn compare_report(dirs: &[PathBuf]) -> Result<CompareReport, HarnessError> {
    if dirs.is_empty() {
        return Err(HarnessError::Compare("no run directories given".into()));
    }
    let mut mismatches = Vec::new();
    let runs = dirs.iter().map(|d| load_run(d, &mut mismatches)).collect::<Result<Vec<_>, _>>()?;
    let mut shared: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for run in &runs {
        for (name, (_, points)) in &run.traces {
            let eps: BTreeSet<usize> = points.keys().copied().collect();
            shared.entry(name.clone()).and_modify(|s| *s = s.intersection(&eps).copied().collect()).or_insert(eps);
        }
    }
    let mut rows = Vec::new();
    for run in &runs {
        for (name, (algorithm, points)) in &run.traces {
            let common = &shared[name];
            let extra: Vec<usize> = points.keys().filter(|e| !common.contains(e)).copied().collect();
            if !extra.is_empty() {
                mismatches.push(format!("{}: {name} checkpoints {extra:?} missing from other runs", run.label));
            }
            for (ep, gaps) in points.iter().filter(|(e, _)| common.contains(e)) {
                rows.push(row(&run.label, *algorithm, RowSource::Trace, *ep, gaps.clone()));
            }
            if let Some(out) = run.outputs.get(name).filter(|o| !o.is_empty()) {
                rows.push(row(&run.label, *algorithm, RowSource::Output, run.episodes, out.clone()));
            }
        }
    }
    Ok(CompareReport { rows, mismatches })
}

/// CSV with columns `run, algorithm, source, episode, n, median, q1, q3`.
pub fn write_report<W: Write>(out: W, report: &CompareReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
