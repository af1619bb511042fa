use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EvalError, Style};

/// One benchmark setting for one question style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub setting: String,
    pub style: Style,
    pub permuted: bool,
    pub n: usize,
    pub accuracy: f64,
    pub rel_delta: f64,
    pub unparseable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrieverRow {
    pub backend: String,
    pub k: usize,
    pub n: usize,
    pub recall: f64,
    pub mrr: f64,
    pub rel_delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Effective configuration the report was produced with.
    pub config: serde_json::Value,
    pub rows: Vec<ReportRow>,
    pub retrievers: Vec<RetrieverRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

/// `(value - best) / best`; the best value maps to exactly 0.
pub fn relative_delta(value: f64, best: f64) -> f64 {
    if best <= 0.0 {
        0.0
    } else {
        (value - best) / best
    }
}

/// Deltas against the highest accuracy among rows of the same style, since
/// styles are charted separately.
pub fn compute_deltas(rows: &mut [ReportRow]) {
    let mut best: BTreeMap<Style, f64> = BTreeMap::new();
    for r in rows.iter() {
        let b = best.entry(r.style).or_insert(r.accuracy);
        *b = b.max(r.accuracy);
    }
    for r in rows.iter_mut() {
        r.rel_delta = relative_delta(r.accuracy, best[&r.style]);
    }
}

pub fn compute_retriever_deltas(rows: &mut [RetrieverRow]) {
    let best = rows.iter().map(|r| r.recall).fold(0.0, f64::max);
    for r in rows.iter_mut() {
        r.rel_delta = relative_delta(r.recall, best);
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| EvalError::Csv(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| EvalError::Csv(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, EvalError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| EvalError::Csv(e.to_string()))
}

pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>, EvalError> {
    read_csv(text)
}

pub fn parse_retrievers_csv(text: &str) -> Result<Vec<RetrieverRow>, EvalError> {
    read_csv(text)
}

pub const REPORT_CSV: &str = "report.csv";
pub const RETRIEVERS_CSV: &str = "retrievers.csv";
pub const REPORT_JSON: &str = "report.json";

/// Writes the report into `dir`, recomputing deltas first. Returns the
/// files written.
pub fn emit_report(report: &EvalReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, EvalError> {
    if report.rows.is_empty() && report.retrievers.is_empty() {
        return Err(EvalError::EmptyReport);
    }
    let mut report = report.clone();
    compute_deltas(&mut report.rows);
    compute_retriever_deltas(&mut report.retrievers);
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        if !report.rows.is_empty() {
            let p = dir.join(REPORT_CSV);
            write_csv(&p, &report.rows)?;
            written.push(p);
        }
        if !report.retrievers.is_empty() {
            let p = dir.join(RETRIEVERS_CSV);
            write_csv(&p, &report.retrievers)?;
            written.push(p);
        }
    }
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let p = dir.join(REPORT_JSON);
        std::fs::write(&p, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
        written.push(p);
    }
    Ok(written)
}
