//! Evaluation metrics. The channel ordering of an estimate is ambiguous, so
//! every metric is computed for both orderings and the better value kept.

use nalgebra::{DMatrix, DVector};
use sssr_core::shuffle::TwoChannelMask;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("length mismatch ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("ground truth has zero norm")]
    ZeroNormTruth,
}

/// Binary assignment accuracy weighted by the per-sample absolute deviation
/// of the two reference signals, evaluated against both the mask and its
/// complement. A zero denominator (identical channels) counts as 1.
pub fn weighted_accuracy(
    q_hat: &TwoChannelMask,
    q_true: &TwoChannelMask,
    x1: &[f64],
    x2: &[f64],
) -> Result<f64, MetricError> {
    let n = q_hat.len();
    for other in [q_true.len(), x1.len(), x2.len()] {
        if other != n {
            return Err(MetricError::LengthMismatch(n, other));
        }
    }
    let denominator: f64 = (0..n).map(|i| (x1[i] - x2[i]).abs()).sum();
    if denominator == 0.0 {
        return Ok(1.0);
    }
    let score = |reference: &TwoChannelMask| -> f64 {
        (0..n)
            .filter(|&i| q_hat.q()[i] == reference.q()[i])
            .map(|i| (x1[i] - x2[i]).abs())
            .sum::<f64>()
            / denominator
    };
    Ok(score(q_true).max(score(&q_true.complement())))
}

/// Squared reconstruction error of `design * beta` against the stacked
/// truth, normalized by the truth's squared norm and minimized over the two
/// channel orderings.
pub fn nmse(
    x1: &[f64],
    x2: &[f64],
    design: &DMatrix<f64>,
    beta: &DVector<f64>,
) -> Result<f64, MetricError> {
    let n = x1.len();
    if x2.len() != n {
        return Err(MetricError::LengthMismatch(n, x2.len()));
    }
    if design.nrows() != 2 * n {
        return Err(MetricError::LengthMismatch(design.nrows(), 2 * n));
    }
    let model = design * beta;
    let norm: f64 = x1.iter().chain(x2.iter()).map(|v| v * v).sum();
    if norm == 0.0 {
        return Err(MetricError::ZeroNormTruth);
    }
    let mut direct = 0.0;
    let mut swapped = 0.0;
    for i in 0..n {
        direct += (x1[i] - model[i]).powi(2) + (x2[i] - model[n + i]).powi(2);
        swapped += (x2[i] - model[i]).powi(2) + (x1[i] - model[n + i]).powi(2);
    }
    Ok(direct.min(swapped) / norm)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Squared support-location error under the best injective matching of the
/// truth into the estimate (circular distances), normalized by the squared
/// norm of the true locations. Unmatched true locations are charged the
/// worst-case circular distance of one half.
pub fn support_nmse(estimated: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    if truth.is_empty() {
        return Err(MetricError::ZeroNormTruth);
    }
    let norm: f64 = truth.iter().map(|t| t * t).sum();
    if norm == 0.0 {
        return Err(MetricError::ZeroNormTruth);
    }
    // exact matching by backtracking; sizes stay in single digits
    fn best_match(
        truth: &[f64],
        estimated: &[f64],
        used: &mut Vec<bool>,
        index: usize,
    ) -> f64 {
        if index == truth.len() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        // leave this truth location unmatched (worst-case distance 0.5)
        let unmatched = 0.25 + best_match(truth, estimated, used, index + 1);
        for e in 0..estimated.len() {
            if used[e] {
                continue;
            }
            used[e] = true;
            let d = circular_distance(truth[index], estimated[e]);
            let rest = d * d + best_match(truth, estimated, used, index + 1);
            used[e] = false;
            if rest < best {
                best = rest;
            }
        }
        best.min(unmatched)
    }
    let mut used = vec![false; estimated.len()];
    Ok(best_match(truth, estimated, &mut used, 0) / norm)
}

/// Pooled `1 - SS_res / SS_tot` of the model channels against the reference
/// channels, under the better of the two orderings.
pub fn r_squared(
    ref1: &[f64],
    ref2: &[f64],
    model1: &[f64],
    model2: &[f64],
) -> Result<f64, MetricError> {
    let n = ref1.len();
    for other in [ref2.len(), model1.len(), model2.len()] {
        if other != n {
            return Err(MetricError::LengthMismatch(n, other));
        }
    }
    let mean: f64 = ref1.iter().chain(ref2.iter()).sum::<f64>() / (2 * n) as f64;
    let ss_tot: f64 = ref1
        .iter()
        .chain(ref2.iter())
        .map(|v| (v - mean).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ZeroNormTruth);
    }
    let mut direct = 0.0;
    let mut swapped = 0.0;
    for i in 0..n {
        direct += (ref1[i] - model1[i]).powi(2) + (ref2[i] - model2[i]).powi(2);
        swapped += (ref1[i] - model2[i]).powi(2) + (ref2[i] - model1[i]).powi(2);
    }
    Ok(1.0 - direct.min(swapped) / ss_tot)
}
