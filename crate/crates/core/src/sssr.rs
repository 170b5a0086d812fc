//! The two-channel recovery loop: estimate the common support from the
//! channel sum, then alternate a robust regression for the coefficients with
//! a closed-form relaxation and binary projection for the per-sample
//! assignment, keeping the iterate with the smallest squared residual.

use crate::numeric;
use crate::robust::{self, MmConfig, RobustError};
use crate::shuffle::TwoChannelMask;
use crate::signal::{build_sensing_matrix, ModelKind, MultiChannelFrame, SensingModel, SignalError};
use crate::spectral::{self, SpectralError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SssrError {
    #[error("channel lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("relaxed assignment entry {0} outside [0, 1]")]
    EntryOutOfRange(f64),
    #[error("order {k} too large for {n} samples")]
    OrderTooLarge { k: usize, n: usize },
    #[error("iteration budget must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Knobs for [`run`]; the defaults match the experiment setup.
#[derive(Debug, Clone)]
pub struct SssrConfig {
    /// Assignment/regression alternations. All iterates are scored; the
    /// loop itself carries no convergence guarantee.
    pub max_iters: usize,
    pub nonnegative: bool,
    pub mm: MmConfig,
    pub cadzow_iters: usize,
    pub cadzow_tol: f64,
    /// Per-channel orders for [`refine`]; `None` splits the total order
    /// evenly.
    pub refine_orders: Option<(usize, usize)>,
}

impl Default for SssrConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            nonnegative: false,
            mm: MmConfig::default(),
            cadzow_iters: 200,
            cadzow_tol: 1e-9,
            refine_orders: None,
        }
    }
}

/// Output of the recovery loop.
#[derive(Debug, Clone)]
pub struct SssrResult {
    /// Estimated per-sample assignment.
    pub assignment: TwoChannelMask,
    /// Stacked coefficients, one block per channel.
    pub coefficients: DVector<f64>,
    pub sensing: SensingModel,
    /// Squared residual of each iteration's (assignment, coefficients) pair.
    pub mse_trace: Vec<f64>,
    /// Index into `mse_trace` of the returned iterate.
    pub best_iteration: usize,
    /// Model reconstruction of both channels.
    pub reconstructed: MultiChannelFrame,
}

impl SssrResult {
    pub fn best_mse(&self) -> f64 {
        self.mse_trace[self.best_iteration]
    }

    pub fn channel_coefficients(&self, channel: usize) -> DVector<f64> {
        let k = self.sensing.atom_count();
        DVector::from_fn(k, |i, _| self.coefficients[channel * k + i])
    }

    /// Block-diagonal regression matrix `diag(E, E)`.
    pub fn stacked_design(&self) -> DMatrix<f64> {
        block_diag_pair(self.sensing.matrix())
    }
}

/// Two-block diagonal stacking `diag(E, E)` used by the stacked regression.
pub fn block_diag_pair(e: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = e.shape();
    let mut a = DMatrix::<f64>::zeros(2 * n, 2 * k);
    a.view_mut((0, 0), (n, k)).copy_from(e);
    a.view_mut((n, k), (n, k)).copy_from(e);
    a
}

/// Per-sample closed-form solution of the relaxed assignment problem: with
/// `d = xhat1 - xhat2`, the separable quadratic is minimized at
/// `(y1 - y2 + d) / (2 d)`, clamped to `[0, 1]`. Samples where the models
/// coincide keep `q = 1`.
pub fn solve_q_relaxed(
    y1: &[f64],
    y2: &[f64],
    xhat1: &[f64],
    xhat2: &[f64],
) -> Result<Vec<f64>, SssrError> {
    let n = y1.len();
    for other in [y2.len(), xhat1.len(), xhat2.len()] {
        if other != n {
            return Err(SssrError::LengthMismatch(n, other));
        }
    }
    let mut q = Vec::with_capacity(n);
    for i in 0..n {
        let d = xhat1[i] - xhat2[i];
        if d.abs() < 1e-12 {
            q.push(1.0);
        } else {
            let star = (y1[i] - y2[i] + d) / (2.0 * d);
            q.push(star.clamp(0.0, 1.0));
        }
    }
    Ok(q)
}

/// Rounds a relaxed assignment at 0.5 (ties kept in place, i.e. mapped
/// to 1); per-sample this picks the binary choice with the smaller squared
/// residual.
pub fn project_binary(q: &[f64]) -> Result<TwoChannelMask, SssrError> {
    let mut bits = Vec::with_capacity(q.len());
    for &v in q {
        if !(0.0..=1.0).contains(&v) {
            return Err(SssrError::EntryOutOfRange(v));
        }
        bits.push(u8::from(v >= 0.5));
    }
    Ok(TwoChannelMask::new(bits).expect("binary bits"))
}

/// Squared residual of an (assignment, model) pair:
/// `|| unshuffle(q)(y) - model ||^2`.
fn assignment_mse(
    mask: &TwoChannelMask,
    y1: &[f64],
    y2: &[f64],
    model1: &[f64],
    model2: &[f64],
) -> f64 {
    let (x1, x2) = mask.apply_pair(y1, y2);
    let mut acc = 0.0;
    for i in 0..x1.len() {
        let d1 = x1[i] - model1[i];
        let d2 = x2[i] - model2[i];
        acc += d1 * d1 + d2 * d2;
    }
    acc
}

/// Full recovery: support from the channel sum, then the Step-2 loop.
pub fn run(
    y1: &[f64],
    y2: &[f64],
    k: usize,
    kind: &ModelKind,
    cfg: &SssrConfig,
) -> Result<SssrResult, SssrError> {
    let n = y1.len();
    if y2.len() != n {
        return Err(SssrError::LengthMismatch(n, y2.len()));
    }
    if n < 2 * k {
        return Err(SssrError::OrderTooLarge { k, n });
    }
    let sum: Vec<f64> = y1.iter().zip(y2).map(|(a, b)| a + b).collect();
    let locations = spectral::estimate_support(&sum, k, kind, cfg.cadzow_iters, cfg.cadzow_tol)?;
    let sensing = build_sensing_matrix(&locations, kind, n)?;
    run_with_sensing(y1, y2, &sensing, cfg)
}

/// Step-2 loop with a caller-supplied sensing matrix (known support, or a
/// refinement pass).
pub fn run_with_sensing(
    y1: &[f64],
    y2: &[f64],
    sensing: &SensingModel,
    cfg: &SssrConfig,
) -> Result<SssrResult, SssrError> {
    let n = y1.len();
    if y2.len() != n {
        return Err(SssrError::LengthMismatch(n, y2.len()));
    }
    if cfg.max_iters == 0 {
        return Err(SssrError::NoIterations);
    }
    let e = sensing.matrix();
    let k = e.ncols();
    let design = block_diag_pair(e);
    let mut x1 = y1.to_vec();
    let mut x2 = y2.to_vec();
    let mut best: Option<(f64, TwoChannelMask, DVector<f64>)> = None;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    for iter in 0..cfg.max_iters {
        let mut response = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            response[i] = x1[i];
            response[n + i] = x2[i];
        }
        let mm_cfg = MmConfig {
            seed: numeric::mix_seed(cfg.mm.seed ^ (iter as u64).wrapping_mul(0x9e37)),
            ..cfg.mm.clone()
        };
        let fit = robust::mm_fit(&design, &response, cfg.nonnegative, &mm_cfg)?;
        let beta = fit.coefficients;
        let model1: Vec<f64> = (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[j]).sum()).collect();
        let model2: Vec<f64> =
            (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[k + j]).sum()).collect();
        let relaxed = solve_q_relaxed(y1, y2, &model1, &model2)?;
        let mask = project_binary(&relaxed)?;
        let mse = assignment_mse(&mask, y1, y2, &model1, &model2);
        trace.push(mse);
        let better = best.as_ref().map_or(true, |(b, _, _)| mse < *b);
        if better {
            best = Some((mse, mask.clone(), beta));
        }
        let (nx1, nx2) = mask.apply_pair(y1, y2);
        x1 = nx1;
        x2 = nx2;
    }
    let (_, mask, beta) = best.expect("at least one iteration");
    let best_iteration = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let model1: Vec<f64> = (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[j]).sum()).collect();
    let model2: Vec<f64> = (0..n).map(|i| (0..k).map(|j| e[(i, j)] * beta[k + j]).sum()).collect();
    let reconstructed = MultiChannelFrame::new(vec![model1, model2], *sensing.kind(), None)?;
    Ok(SssrResult {
        assignment: mask,
        coefficients: beta,
        sensing: sensing.clone(),
        mse_trace: trace,
        best_iteration,
        reconstructed,
    })
}

/// Refinement pass: reassign samples by the estimated mask, re-estimate the
/// support per individual channel, rebuild the sensing matrix from the union
/// of supports and rerun the loop. Returns whichever of the input and the
/// refined result has the smaller squared residual.
pub fn refine(
    result: &SssrResult,
    y1: &[f64],
    y2: &[f64],
    k: usize,
    kind: &ModelKind,
    cfg: &SssrConfig,
) -> Result<SssrResult, SssrError> {
    let (k1, k2) = cfg
        .refine_orders
        .unwrap_or_else(|| ((k / 2).max(1), (k - k / 2).max(1)));
    let (x1, x2) = result.assignment.apply_pair(y1, y2);
    let locs1 = spectral::estimate_support(&x1, k1, kind, cfg.cadzow_iters, cfg.cadzow_tol)?;
    let locs2 = spectral::estimate_support(&x2, k2, kind, cfg.cadzow_iters, cfg.cadzow_tol)?;
    let mut union = locs1;
    union.extend(locs2);
    let union = spectral::merge_close_locations(union, 1e-9);
    let sensing = build_sensing_matrix(&union, kind, y1.len())?;
    let refined = run_with_sensing(y1, y2, &sensing, cfg)?;
    if refined.best_mse() <= result.best_mse() {
        Ok(refined)
    } else {
        Ok(result.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shuffle::TwoChannelMask;
    use crate::signal::{synthesize, DiracStream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn two_channel_instance(
        seed: u64,
        n: usize,
        k_per_channel: usize,
        shuffled: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, TwoChannelMask, Vec<f64>) {
        let mut rng = numeric::rng_stream(seed, &[0x11]);
        let k_total = 2 * k_per_channel;
        let mut locations: Vec<f64> = Vec::new();
        while locations.len() < k_total {
            let t: f64 = rng.gen();
            let ok = locations.iter().all(|&u| {
                let d: f64 = (t - u).abs();
                d.min(1.0 - d) >= 0.05
            });
            if ok {
                locations.push(t);
            }
        }
        let weights: Vec<f64> = (0..k_total).map(|_| 0.5 + 0.5 * rng.gen::<f64>()).collect();
        let s1 = DiracStream::new(
            locations[..k_per_channel].to_vec(),
            weights[..k_per_channel].to_vec(),
        )
        .unwrap();
        let s2 = DiracStream::new(
            locations[k_per_channel..].to_vec(),
            weights[k_per_channel..].to_vec(),
        )
        .unwrap();
        let x1 = synthesize(&s1, &ModelKind::Dirac, n).unwrap();
        let x2 = synthesize(&s2, &ModelKind::Dirac, n).unwrap();
        let mask = TwoChannelMask::random(n, shuffled, seed ^ 0xbeef).unwrap();
        let (y1, y2) = mask.apply_pair(&x1, &x2);
        (x1, x2, y1, y2, mask, locations)
    }

    #[test]
    fn relaxed_assignment_algebraic_cases() {
        let x1 = vec![1.0, -2.0, 3.0];
        let x2 = vec![0.5, 4.0, -1.0];
        // exact fit, no shuffle: q = 1 everywhere
        let q = solve_q_relaxed(&x1, &x2, &x1, &x2).unwrap();
        assert!(q.iter().all(|&v| v == 1.0));
        // full swap: q = 0 everywhere
        let q = solve_q_relaxed(&x2, &x1, &x1, &x2).unwrap();
        assert!(q.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn relaxed_assignment_rejects_mismatched_lengths() {
        assert!(solve_q_relaxed(&[1.0], &[1.0, 2.0], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn binary_projection_rules() {
        let mask = project_binary(&[0.3, 0.3, 0.3]).unwrap();
        assert_eq!(mask.q(), &[0, 0, 0]);
        let mask = project_binary(&[0.5, 0.5]).unwrap();
        assert_eq!(mask.q(), &[1, 1]);
        assert!(project_binary(&[1.2]).is_err());
        assert!(project_binary(&[-0.1]).is_err());
    }

    #[test]
    fn projection_matches_per_sample_residual_oracle() {
        let mut rng = numeric::rng_stream(3, &[0x22]);
        for _ in 0..50 {
            let n = 8;
            let y1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let y2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let m1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let m2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let mask = project_binary(&solve_q_relaxed(&y1, &y2, &m1, &m2).unwrap()).unwrap();
            for i in 0..n {
                let keep = (y1[i] - m1[i]).powi(2) + (y2[i] - m2[i]).powi(2);
                let swap = (y2[i] - m1[i]).powi(2) + (y1[i] - m2[i]).powi(2);
                let choice = mask.q()[i];
                if keep < swap - 1e-12 {
                    assert_eq!(choice, 1, "sample {i} should keep");
                }
                if swap < keep - 1e-12 {
                    assert_eq!(choice, 0, "sample {i} should swap");
                }
            }
        }
    }

    #[test]
    fn relax_and_project_never_increase_objective() {
        let mut rng = numeric::rng_stream(9, &[0x33]);
        for _ in 0..50 {
            let n = 10;
            let y1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let y2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let m1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let m2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
            let incoming =
                TwoChannelMask::new((0..n).map(|_| u8::from(rng.gen::<bool>())).collect()).unwrap();
            let incoming_obj = assignment_mse(&incoming, &y1, &y2, &m1, &m2);
            let mask = project_binary(&solve_q_relaxed(&y1, &y2, &m1, &m2).unwrap()).unwrap();
            let new_obj = assignment_mse(&mask, &y1, &y2, &m1, &m2);
            assert!(new_obj <= incoming_obj + 1e-12);
        }
    }

    #[test]
    fn exhaustive_binary_oracle_small_instance() {
        // relax + project equals brute force over {0,1}^N
        let mut rng = numeric::rng_stream(17, &[0x44]);
        let n = 12;
        let y1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let y2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let m1: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let m2: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        let mask = project_binary(&solve_q_relaxed(&y1, &y2, &m1, &m2).unwrap()).unwrap();
        let achieved = assignment_mse(&mask, &y1, &y2, &m1, &m2);
        let mut brute = f64::INFINITY;
        for bits in 0u32..(1 << n) {
            let q: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
            let candidate = TwoChannelMask::new(q).unwrap();
            brute = brute.min(assignment_mse(&candidate, &y1, &y2, &m1, &m2));
        }
        assert_abs_diff_eq!(achieved, brute, epsilon = 1e-9);
    }

    #[test]
    fn noiseless_recovery_is_exact_at_half_shuffling() {
        let n = 121;
        let (x1, x2, y1, y2, mask, _) = two_channel_instance(5, n, 2, 60);
        let cfg = SssrConfig::default();
        let result = run(&y1, &y2, 4, &ModelKind::Dirac, &cfg).unwrap();
        // reconstruction matches the truth up to channel renaming
        let r1 = result.reconstructed.channel(0);
        let r2 = result.reconstructed.channel(1);
        let direct: f64 = (0..n)
            .map(|i| (r1[i] - x1[i]).powi(2) + (r2[i] - x2[i]).powi(2))
            .sum();
        let swapped: f64 = (0..n)
            .map(|i| (r1[i] - x2[i]).powi(2) + (r2[i] - x1[i]).powi(2))
            .sum();
        let norm: f64 = (0..n).map(|i| x1[i].powi(2) + x2[i].powi(2)).sum();
        assert!(
            direct.min(swapped) / norm <= 1e-9,
            "nmse {}",
            direct.min(swapped) / norm
        );
        // assignment matches the truth up to the same renaming
        let q_ok = result.assignment == mask || result.assignment == mask.complement();
        assert!(q_ok);
    }

    #[test]
    fn zero_shuffling_noiseless_keeps_identity() {
        let (_, _, y1, y2, _, _) = two_channel_instance(8, 121, 2, 0);
        let result = run(&y1, &y2, 4, &ModelKind::Dirac, &SssrConfig::default()).unwrap();
        assert_eq!(result.assignment.ones_count(), 121);
        let norm: f64 = y1.iter().chain(&y2).map(|v| v * v).sum();
        assert!(result.best_mse() <= 1e-18 * norm.max(1.0) + 1e-20);
    }

    #[test]
    fn best_iteration_indexes_trace_minimum() {
        let (_, _, y1, y2, _, _) = two_channel_instance(21, 61, 2, 20);
        let result = run(&y1, &y2, 4, &ModelKind::Dirac, &SssrConfig::default()).unwrap();
        let min = result
            .mse_trace
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(result.best_mse(), min);
    }

    #[test]
    fn channel_order_swap_equivalence_noiseless() {
        let (_, _, y1, y2, _, _) = two_channel_instance(13, 121, 2, 40);
        let cfg = SssrConfig::default();
        let a = run(&y1, &y2, 4, &ModelKind::Dirac, &cfg).unwrap();
        let b = run(&y2, &y1, 4, &ModelKind::Dirac, &cfg).unwrap();
        assert_abs_diff_eq!(a.best_mse(), b.best_mse(), epsilon = 1e-9);
        // swapped-input assignment is the complement of the direct one
        // (possibly after the global renaming)
        let direct = a.assignment.clone();
        let swapped = b.assignment.clone();
        assert!(swapped == direct || swapped == direct.complement());
    }

    #[test]
    fn true_sensing_matrix_any_shuffle_count_noiseless() {
        // with the support known exactly, recovery is exact for any count
        for shuffled in [0usize, 10, 30, 60, 90, 121] {
            let (x1, x2, y1, y2, _, locations) = two_channel_instance(31, 121, 2, shuffled);
            let sensing = build_sensing_matrix(&locations, &ModelKind::Dirac, 121).unwrap();
            let result = run_with_sensing(&y1, &y2, &sensing, &SssrConfig::default()).unwrap();
            let r1 = result.reconstructed.channel(0);
            let r2 = result.reconstructed.channel(1);
            let direct: f64 = (0..121)
                .map(|i| (r1[i] - x1[i]).powi(2) + (r2[i] - x2[i]).powi(2))
                .sum();
            let swapped: f64 = (0..121)
                .map(|i| (r1[i] - x2[i]).powi(2) + (r2[i] - x1[i]).powi(2))
                .sum();
            let norm: f64 = (0..121).map(|i| x1[i].powi(2) + x2[i].powi(2)).sum();
            assert!(
                direct.min(swapped) / norm <= 1e-9,
                "count {shuffled}: nmse {}",
                direct.min(swapped) / norm
            );
        }
    }

    #[test]
    fn exhaustive_mask_oracle_tiny_instance() {
        // final MSE no worse than the best least-squares fit over every
        // binary mask and both channel orderings
        let n = 11;
        let (_, _, y1, y2, _, locations) = two_channel_instance(41, n, 1, 4);
        let sensing = build_sensing_matrix(&locations, &ModelKind::Dirac, n).unwrap();
        let result = run_with_sensing(&y1, &y2, &sensing, &SssrConfig::default()).unwrap();
        let design = block_diag_pair(sensing.matrix());
        let mut brute = f64::INFINITY;
        for bits in 0u32..(1 << n) {
            let q: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
            let mask = TwoChannelMask::new(q).unwrap();
            let (x1, x2) = mask.apply_pair(&y1, &y2);
            let mut resp = DVector::<f64>::zeros(2 * n);
            for i in 0..n {
                resp[i] = x1[i];
                resp[n + i] = x2[i];
            }
            let beta = numeric::lstsq_min_norm(&design, &resp);
            let mse = (&resp - &design * &beta).norm_squared();
            brute = brute.min(mse);
        }
        assert!(result.best_mse() <= brute + 1e-6);
    }

    #[test]
    fn refine_keeps_exact_result_unchanged() {
        let (_, _, y1, y2, _, _) = two_channel_instance(51, 121, 2, 40);
        let cfg = SssrConfig::default();
        let result = run(&y1, &y2, 4, &ModelKind::Dirac, &cfg).unwrap();
        let refined = refine(&result, &y1, &y2, 4, &ModelKind::Dirac, &cfg).unwrap();
        assert!(refined.best_mse() <= result.best_mse() + 1e-15);
    }

    #[test]
    fn rejects_order_too_large() {
        let y = vec![0.0; 7];
        assert!(matches!(
            run(&y, &y, 4, &ModelKind::Dirac, &SssrConfig::default()),
            Err(SssrError::OrderTooLarge { .. })
        ));
    }
}
