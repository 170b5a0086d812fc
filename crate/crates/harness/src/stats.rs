//! Percentile summaries over trial metrics.

/// Linear-interpolation percentile (the common "type 7" definition) of a
/// sorted slice. `p` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub const SUMMARY_PERCENTILES: [(f64, &str); 7] = [
    (0.05, "p05"),
    (0.10, "p10"),
    (0.25, "p25"),
    (0.50, "p50"),
    (0.75, "p75"),
    (0.90, "p90"),
    (0.95, "p95"),
];

/// Sorts (NaN-free) values and evaluates the summary percentile grid.
pub fn summary_percentiles(values: &[f64]) -> Option<[f64; 7]> {
    let mut clean: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if clean.is_empty() {
        return None;
    }
    clean.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = [0.0; 7];
    for (slot, (p, _)) in out.iter_mut().zip(SUMMARY_PERCENTILES.iter()) {
        *slot = percentile_sorted(&clean, *p);
    }
    Some(out)
}
