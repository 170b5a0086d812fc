//! CSV serialization with deterministic formatting: floats carry nine
//! significant digits, special values print as `nan` / `inf` / `-inf`, and
//! identical inputs always produce identical bytes.

use crate::experiment::{SeriesOutput, TrialRecord};
use crate::stats::SUMMARY_PERCENTILES;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const RAW_HEADER: &str = "trial,seed,snr_db,shuffled,wa,nmse,r2,support_nmse,iters,ms";
pub const SUMMARY_HEADER: &str = "snr_db,shuffled,metric,p05,p10,p25,p50,p75,p90,p95";

/// Nine significant digits; special values as parseable literals.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{:.8e}", v)
    }
}

/// Round-trips a value through its CSV representation so that summaries
/// computed downstream from the raw file agree bit-for-bit.
pub fn csv_round_trip(v: f64) -> f64 {
    fmt_float(v).parse().expect("fmt_float output parses")
}

pub fn raw_row(r: &TrialRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.trial,
        r.seed,
        fmt_float(r.snr_db),
        r.shuffled,
        fmt_float(r.wa),
        fmt_float(r.nmse),
        fmt_float(r.r2),
        fmt_float(r.support_nmse),
        r.iters,
        fmt_float(r.ms),
    )
}

pub fn raw_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&raw_row(r));
        out.push('\n');
    }
    out
}

/// One summary row per (cell, metric) with the percentile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub snr_db: f64,
    pub shuffled: usize,
    pub metric: &'static str,
    pub percentiles: [f64; 7],
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    debug_assert_eq!(SUMMARY_PERCENTILES.len(), 7);
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&fmt_float(r.snr_db));
        out.push(',');
        out.push_str(&r.shuffled.to_string());
        out.push(',');
        out.push_str(r.metric);
        for p in r.percentiles {
            out.push(',');
            out.push_str(&fmt_float(p));
        }
        out.push('\n');
    }
    out
}

/// Writes `{prefix}_{series}_raw.csv` and `{prefix}_{series}_summary.csv`
/// for every series; returns the written paths.
pub fn write_series(prefix: &str, series: &[SeriesOutput]) -> Result<Vec<PathBuf>, CsvError> {
    let mut written = Vec::new();
    for s in series {
        let raw_path = PathBuf::from(format!("{prefix}_{}_raw.csv", s.name));
        write_text(&raw_path, &raw_csv(&s.records))?;
        written.push(raw_path);
        let summary_path = PathBuf::from(format!("{prefix}_{}_summary.csv", s.name));
        write_text(&summary_path, &summary_csv(&s.summary))?;
        written.push(summary_path);
    }
    Ok(written)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CsvError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| CsvError::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    file.write_all(text.as_bytes()).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })
}
