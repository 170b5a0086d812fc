//! Reference estimators: HardEM alternating minimization for unstructured
//! permutations, and the oracle pipelines (known assignment, known support)
//! used as lower-bound curves.

use crate::numeric;
use crate::robust::RobustError;
use crate::shuffle::TwoChannelMask;
use crate::signal::{build_sensing_matrix, ModelKind, SignalError};
use crate::spectral::{self, SpectralError};
use crate::sssr::{self, SssrConfig, SssrError, SssrResult};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Sssr(#[from] SssrError),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

/// Alternating minimization for `y = P X beta` with an unstructured
/// permutation `P`: given `beta`, the optimal permutation matches sorted
/// responses to sorted predictions (optimal for a scalar response); given
/// the match, `beta` is the least-squares fit. The first restart starts from
/// the identity permutation, the rest from random ones; the best-objective
/// coefficients are returned.
pub fn hard_em(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<DVector<f64>, BaselineError> {
    let rows = design.nrows();
    if rows != response.len() {
        return Err(BaselineError::DimensionMismatch(format!(
            "design rows {rows} vs response {}",
            response.len()
        )));
    }
    {
        let svd = design.clone().svd(false, false);
        let smax = svd.singular_values.max();
        if smax <= 0.0 || svd.singular_values.min() < 1e-12 * smax {
            return Err(BaselineError::RankDeficient);
        }
    }
    let mut rng = numeric::rng_stream(seed, &[0x6865_6d]);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for restart in 0..restarts.max(1) {
        // target[i] = response value currently assigned to design row i
        let mut target: Vec<f64> = response.iter().copied().collect();
        if restart > 0 {
            target.shuffle(&mut rng);
        }
        let mut objective = f64::INFINITY;
        let mut beta = DVector::<f64>::zeros(design.ncols());
        for _ in 0..max_iters.max(1) {
            let t = DVector::from_column_slice(&target);
            beta = numeric::lstsq_min_norm(design, &t);
            let predictions = design * &beta;
            // re-match: sorted responses against sorted predictions
            let mut by_prediction: Vec<usize> = (0..rows).collect();
            by_prediction.sort_by(|&a, &b| predictions[a].partial_cmp(&predictions[b]).unwrap());
            let mut sorted_responses: Vec<f64> = response.iter().copied().collect();
            sorted_responses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut next = vec![0.0; rows];
            for (rank, &row) in by_prediction.iter().enumerate() {
                next[row] = sorted_responses[rank];
            }
            let next_objective: f64 = (0..rows)
                .map(|i| (next[i] - predictions[i]).powi(2))
                .sum();
            let done = next == target
                || (objective.is_finite()
                    && (objective - next_objective).abs() <= 1e-14 * objective.abs());
            target = next;
            objective = next_objective;
            if done {
                break;
            }
        }
        if best.as_ref().map_or(true, |(b, _)| objective < *b) {
            best = Some((objective, beta));
        }
    }
    Ok(best.expect("at least one restart").1)
}

/// Unshuffles with the true mask, then estimates support and amplitudes per
/// individual channel; the assignment-free reference pipeline.
pub fn oracle_known_assignment(
    y1: &[f64],
    y2: &[f64],
    q_true: &TwoChannelMask,
    k_per_channel: usize,
    kind: &ModelKind,
    cfg: &SssrConfig,
) -> Result<SssrResult, BaselineError> {
    let n = y1.len();
    if y2.len() != n || q_true.len() != n {
        return Err(BaselineError::DimensionMismatch(format!(
            "lengths {n}, {}, mask {}",
            y2.len(),
            q_true.len()
        )));
    }
    let (x1, x2) = q_true.apply_pair(y1, y2);
    let locs1 = spectral::estimate_support(&x1, k_per_channel, kind, cfg.cadzow_iters, cfg.cadzow_tol)?;
    let locs2 = spectral::estimate_support(&x2, k_per_channel, kind, cfg.cadzow_iters, cfg.cadzow_tol)?;
    let w1 = spectral::amplitude_lsq(&x1, &locs1, kind, cfg.nonnegative)?;
    let w2 = spectral::amplitude_lsq(&x2, &locs2, kind, cfg.nonnegative)?;
    // union support with per-channel coefficients placed at their columns
    let mut union = locs1.clone();
    union.extend(locs2.iter().copied());
    let union = spectral::merge_close_locations(union, 1e-9);
    let sensing = build_sensing_matrix(&union, kind, n)?;
    let k = union.len();
    let mut beta = DVector::<f64>::zeros(2 * k);
    let find = |t: f64| -> usize {
        union
            .iter()
            .enumerate()
            .min_by(|a, b| {
                let da = (a.1 - t).abs().min(1.0 - (a.1 - t).abs());
                let db = (b.1 - t).abs().min(1.0 - (b.1 - t).abs());
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap()
    };
    for (t, w) in locs1.iter().zip(&w1) {
        beta[find(*t)] = *w;
    }
    for (t, w) in locs2.iter().zip(&w2) {
        beta[k + find(*t)] = *w;
    }
    let e = sensing.matrix();
    let model1: Vec<f64> = (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[j]).sum()).collect();
    let model2: Vec<f64> = (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[k + j]).sum()).collect();
    let mse: f64 = (0..n)
        .map(|i| (x1[i] - model1[i]).powi(2) + (x2[i] - model2[i]).powi(2))
        .sum();
    let reconstructed =
        crate::signal::MultiChannelFrame::new(vec![model1, model2], *kind, None)?;
    Ok(SssrResult {
        assignment: q_true.clone(),
        coefficients: beta,
        sensing,
        mse_trace: vec![mse],
        best_iteration: 0,
        reconstructed,
    })
}

/// Skips support estimation entirely: runs the assignment/regression loop
/// with the sensing matrix built from the true locations.
pub fn oracle_known_support(
    y1: &[f64],
    y2: &[f64],
    true_locations: &[f64],
    kind: &ModelKind,
    cfg: &SssrConfig,
) -> Result<SssrResult, BaselineError> {
    let sensing = build_sensing_matrix(true_locations, kind, y1.len())?;
    Ok(sssr::run_with_sensing(y1, y2, &sensing, cfg)?)
}
