//! Numeric trace ingestion: one CSV row per sample, one column per channel,
//! with per-channel baseline subtraction at a configurable quantile.

use crate::stats;
use sssr_core::signal::{ModelKind, MultiChannelFrame};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: file has no rows")]
    Empty { path: String },
    #[error("{path}:{row}: expected {expected} columns, found {found}")]
    RaggedRow {
        path: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("{path}:{row}: column {column}: cannot parse {value:?} as a number")]
    BadCell {
        path: String,
        row: usize,
        column: usize,
        value: String,
    },
    #[error("{path}: need at least 2 channels, found {found}")]
    TooFewChannels { path: String, found: usize },
}

/// Parses an M-column numeric CSV into per-channel sample vectors and
/// subtracts each channel's `baseline_quantile` value. Row and column
/// numbers in errors are 1-based.
pub fn ingest_traces(path: &str, baseline_quantile: f64) -> Result<MultiChannelFrame, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_string(),
        source,
    })?;
    parse_traces(path, &text, baseline_quantile)
}

pub fn parse_traces(
    path: &str,
    text: &str,
    baseline_quantile: f64,
) -> Result<MultiChannelFrame, IngestError> {
    let mut channels: Vec<Vec<f64>> = Vec::new();
    let mut expected = 0usize;
    for (row_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if channels.is_empty() {
            expected = cells.len();
            if expected < 2 {
                return Err(IngestError::TooFewChannels {
                    path: path.to_string(),
                    found: expected,
                });
            }
            channels = vec![Vec::new(); expected];
        } else if cells.len() != expected {
            return Err(IngestError::RaggedRow {
                path: path.to_string(),
                row: row_idx + 1,
                expected,
                found: cells.len(),
            });
        }
        for (col_idx, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| IngestError::BadCell {
                path: path.to_string(),
                row: row_idx + 1,
                column: col_idx + 1,
                value: cell.trim().to_string(),
            })?;
            channels[col_idx].push(value);
        }
    }
    if channels.is_empty() {
        return Err(IngestError::Empty {
            path: path.to_string(),
        });
    }
    for channel in &mut channels {
        let mut sorted = channel.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let baseline = stats::percentile_sorted(&sorted, baseline_quantile);
        for v in channel.iter_mut() {
            *v -= baseline;
        }
    }
    Ok(MultiChannelFrame::new(channels, ModelKind::Dirac, None).expect("2+ equal-length channels"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn round_trips_harness_written_csv() {
        let rows: Vec<String> = (0..9)
            .map(|i| format!("{},{}", i as f64 * 0.5, 8.0 - i as f64))
            .collect();
        let text = rows.join("\n");
        // a zero quantile subtracts each channel's minimum
        let frame = parse_traces("test.csv", &text, 0.0).unwrap();
        assert_eq!(frame.channel_count(), 2);
        assert_eq!(frame.sample_count(), 9);
        for i in 0..9 {
            assert_abs_diff_eq!(frame.channel(0)[i], i as f64 * 0.5);
            assert_abs_diff_eq!(frame.channel(1)[i], 8.0 - i as f64);
        }
    }

    #[test]
    fn constant_offset_is_removed() {
        let text = "5.0,7.0\n5.0,7.0\n5.0,7.0";
        let frame = parse_traces("t.csv", text, 0.1).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(frame.channel(0)[i], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(frame.channel(1)[i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ragged_rows_are_diagnosed() {
        let err = parse_traces("t.csv", "1,2\n3,4,5\n", 0.1).unwrap_err();
        match err {
            IngestError::RaggedRow { row, expected, found, .. } => {
                assert_eq!((row, expected, found), (2, 2, 3));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_cells_are_diagnosed_with_position() {
        let err = parse_traces("t.csv", "1,2\n3,x\n", 0.1).unwrap_err();
        match err {
            IngestError::BadCell { row, column, value, .. } => {
                assert_eq!((row, column), (2, 2));
                assert_eq!(value, "x");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_column_rejected() {
        assert!(matches!(
            parse_traces("t.csv", "1\n2\n", 0.1),
            Err(IngestError::TooFewChannels { .. })
        ));
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(
            parse_traces("t.csv", "\n\n", 0.1),
            Err(IngestError::Empty { .. })
        ));
    }
}
