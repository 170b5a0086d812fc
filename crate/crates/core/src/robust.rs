//! Robust linear regression: an S-estimator (Tukey bisquare M-scale, random
//! subsample starts with local refinement) fixes the residual scale, then an
//! efficient M-step runs IRWLS at that fixed scale. Optionally every
//! weighted solve is replaced by a weighted nonnegative least-squares solve.

use crate::numeric::{self, NumericError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RobustError {
    #[error("need more rows than columns ({rows} x {cols})")]
    Underdetermined { rows: usize, cols: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("residual vector is empty")]
    EmptyResiduals,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Tukey bisquare loss normalized to `max = 1`.
pub fn bisquare_rho(u: f64, c: f64) -> f64 {
    let r = (u / c).abs();
    if r >= 1.0 {
        1.0
    } else {
        let t = 1.0 - r * r;
        1.0 - t * t * t
    }
}

/// IRWLS weight `psi(u)/u` for the bisquare, scaled to `w(0) = 1`.
pub fn bisquare_weight(u: f64, c: f64) -> f64 {
    let r = (u / c).abs();
    if r >= 1.0 {
        0.0
    } else {
        let t = 1.0 - r * r;
        t * t
    }
}

/// M-scale estimate solving `(1/N) sum rho(r_i / s) = b`.
#[derive(Debug, Clone, Copy)]
pub struct ScaleEstimate {
    pub scale: f64,
    /// Set when the equation has no positive solution (more than a `1 - b`
    /// fraction of the residuals are exactly zero); `scale` is 0 then.
    pub degenerate: bool,
}

/// Fixed-point solve of the M-scale equation with a bisection fallback.
/// Relative tolerance 1e-9.
pub fn m_scale(residuals: &[f64], c: f64, b: f64) -> Result<ScaleEstimate, RobustError> {
    if residuals.is_empty() {
        return Err(RobustError::EmptyResiduals);
    }
    let n = residuals.len() as f64;
    let nonzero: Vec<f64> = residuals.iter().map(|r| r.abs()).filter(|&r| r > 0.0).collect();
    if (nonzero.len() as f64) / n < b {
        // rho saturates at 1, so the average can never reach b
        return Ok(ScaleEstimate {
            scale: 0.0,
            degenerate: true,
        });
    }
    let g = |s: f64| -> f64 { residuals.iter().map(|&r| bisquare_rho(r / s, c)).sum::<f64>() / n };
    let mut abs: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = abs[abs.len() / 2];
    let mut s = if median > 0.0 {
        median / 0.6745
    } else {
        nonzero.iter().sum::<f64>() / nonzero.len() as f64
    };
    let tol = 1e-9;
    for _ in 0..200 {
        let val = g(s);
        if val <= 0.0 {
            break; // scale overshot far above all residuals
        }
        let next = s * (val / b).sqrt();
        let done = (next - s).abs() <= tol * next;
        s = next;
        if done {
            return Ok(ScaleEstimate {
                scale: s,
                degenerate: false,
            });
        }
    }
    // bisection on the monotone decreasing g
    let max_abs = *abs.last().unwrap();
    let mut lo = max_abs * 1e-15;
    let mut hi = max_abs * 10.0;
    if g(lo) < b {
        return Ok(ScaleEstimate {
            scale: 0.0,
            degenerate: true,
        });
    }
    while g(hi) > b {
        hi *= 10.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > b {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol * hi {
            break;
        }
    }
    Ok(ScaleEstimate {
        scale: 0.5 * (lo + hi),
        degenerate: false,
    })
}

/// Tuning for [`mm_fit`]. The S-stage constants give a 50% breakdown point,
/// the M-stage constant 95% efficiency at the normal model.
#[derive(Debug, Clone)]
pub struct MmConfig {
    pub s_tuning: f64,
    pub breakdown: f64,
    pub mm_tuning: f64,
    /// Number of successful random subsample candidates in the S-stage.
    pub subsamples: usize,
    /// Local IRWLS refinement steps applied to the best subsample candidates.
    pub refine_steps: usize,
    /// Candidates kept for refinement, ranked by scale.
    pub refine_candidates: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            s_tuning: 1.547,
            breakdown: 0.5,
            mm_tuning: 4.685,
            subsamples: 50,
            refine_steps: 10,
            refine_candidates: 5,
            seed: 0x4d4d,
            tol: 1e-8,
            max_iters: 200,
        }
    }
}

/// Result of a robust fit.
#[derive(Debug, Clone)]
pub struct RobustFit {
    pub coefficients: DVector<f64>,
    pub scale: f64,
    /// Final IRWLS weights, all in `[0, 1]`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Majority of residuals exactly zero; the S-scale is 0 and the M-step
    /// reduces to least squares on the exactly-fitted rows.
    pub degenerate_scale: bool,
    /// M-stage objective after every accepted IRWLS iteration.
    pub objective_trace: Vec<f64>,
}

fn weighted_solve(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    weights: &[f64],
    nonnegative: bool,
) -> Result<DVector<f64>, RobustError> {
    let rows = design.nrows();
    let cols = design.ncols();
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut b = DVector::<f64>::zeros(rows);
    for i in 0..rows {
        let w = weights[i].max(0.0).sqrt();
        for j in 0..cols {
            a[(i, j)] = design[(i, j)] * w;
        }
        b[i] = response[i] * w;
    }
    if nonnegative {
        Ok(numeric::nnls(&a, &b)?)
    } else {
        Ok(numeric::lstsq_min_norm(&a, &b))
    }
}

fn residuals(design: &DMatrix<f64>, response: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    response - design * beta
}

/// MM-regression. An S-stage (random exact-fit subsamples, the best few
/// locally refined) produces a high-breakdown scale and starting point; the
/// M-stage iterates reweighted least squares at that fixed scale until the
/// relative coefficient change drops below `cfg.tol`.
pub fn mm_fit(
    design: &DMatrix<f64>,
    response: &DVector<f64>,
    nonnegative: bool,
    cfg: &MmConfig,
) -> Result<RobustFit, RobustError> {
    let rows = design.nrows();
    let cols = design.ncols();
    if rows <= cols {
        return Err(RobustError::Underdetermined { rows, cols });
    }
    {
        let svd = design.clone().svd(false, false);
        let smax = svd.singular_values.max();
        if smax <= 0.0 || svd.singular_values.min() < 1e-12 * smax {
            return Err(RobustError::RankDeficient);
        }
    }

    let mut rng = numeric::rng_stream(cfg.seed, &[0x6d6d_5f73]);
    let evaluate = |beta: &DVector<f64>| -> Result<(f64, bool), RobustError> {
        let r = residuals(design, response, beta);
        let est = m_scale(r.as_slice(), cfg.s_tuning, cfg.breakdown)?;
        Ok((est.scale, est.degenerate))
    };

    // S-stage: exact-fit candidates from random row subsamples.
    let mut candidates: Vec<(f64, bool, DVector<f64>)> = Vec::new();
    let mut attempts = 0usize;
    let max_attempts = cfg.subsamples * 100;
    while candidates.len() < cfg.subsamples && attempts < max_attempts {
        attempts += 1;
        let idx = rand::seq::index::sample(&mut rng, rows, cols).into_vec();
        let sub = design.select_rows(idx.iter());
        let rhs = DVector::from_fn(cols, |i, _| response[idx[i]]);
        let lu = sub.clone().lu();
        let Some(beta) = lu.solve(&rhs) else {
            continue;
        };
        if !beta.iter().all(|v| v.is_finite()) {
            continue;
        }
        // reject numerically singular subsystems that slipped past LU
        if (&sub * &beta - &rhs).amax() > 1e-6 * (rhs.amax() + 1.0) {
            continue;
        }
        let (scale, degenerate) = evaluate(&beta)?;
        candidates.push((scale, degenerate, beta));
    }
    if candidates.is_empty() {
        return Err(RobustError::RankDeficient);
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // A collapsed scale (zero, or at rounding level relative to the data)
    // means a majority of rows are fitted exactly: refit by least squares on
    // those rows and report unit weights there.
    let exact_threshold = 1e-12 * response.amax().max(1.0);
    if candidates[0].1 || candidates[0].0 <= exact_threshold {
        let (scale, degenerate, beta) = candidates.into_iter().next().unwrap();
        let fit_tol = 1e-9 * response.amax().max(1.0);
        let r = residuals(design, response, &beta);
        let weights: Vec<f64> = r.iter().map(|&v| f64::from(v.abs() <= fit_tol)).collect();
        let active = weights.iter().sum::<f64>() as usize;
        if active > cols {
            let refit = weighted_solve(design, response, &weights, nonnegative)?;
            let r = residuals(design, response, &refit);
            let weights: Vec<f64> = r.iter().map(|&v| f64::from(v.abs() <= fit_tol)).collect();
            return Ok(RobustFit {
                coefficients: refit,
                scale,
                weights,
                iterations: 0,
                converged: true,
                degenerate_scale: degenerate,
                objective_trace: Vec::new(),
            });
        }
        return Ok(RobustFit {
            coefficients: beta,
            scale,
            weights,
            iterations: 0,
            converged: true,
            degenerate_scale: degenerate,
            objective_trace: Vec::new(),
        });
    }

    // Local refinement of the leading candidates on the S-objective.
    let keep = cfg.refine_candidates.max(1).min(candidates.len());
    let mut best_scale = f64::INFINITY;
    let mut best_beta = candidates[0].2.clone();
    for (scale0, _, beta0) in candidates.into_iter().take(keep) {
        let mut beta = beta0;
        let mut scale = scale0;
        for _ in 0..cfg.refine_steps {
            let r = residuals(design, response, &beta);
            let w: Vec<f64> = r
                .iter()
                .map(|&v| bisquare_weight(v / scale, cfg.s_tuning))
                .collect();
            if w.iter().sum::<f64>() <= cols as f64 {
                break; // too few active rows to refit
            }
            let next = weighted_solve(design, response, &w, nonnegative)?;
            let (next_scale, degenerate) = evaluate(&next)?;
            if degenerate || next_scale >= scale {
                break;
            }
            let rel = (next_scale - scale).abs() / scale.max(f64::MIN_POSITIVE);
            beta = next;
            scale = next_scale;
            if rel < 1e-9 {
                break;
            }
        }
        if scale < best_scale {
            best_scale = scale;
            best_beta = beta;
        }
    }

    // M-stage: IRWLS at the fixed S-scale with the efficient tuning constant.
    let scale = best_scale;
    let mut beta = best_beta;
    let objective = |beta: &DVector<f64>| -> f64 {
        residuals(design, response, beta)
            .iter()
            .map(|&r| bisquare_rho(r / scale, cfg.mm_tuning))
            .sum()
    };
    let mut obj = objective(&beta);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0usize;
    let mut weights: Vec<f64> = residuals(design, response, &beta)
        .iter()
        .map(|&r| bisquare_weight(r / scale, cfg.mm_tuning))
        .collect();
    for iter in 1..=cfg.max_iters {
        iterations = iter;
        let next = weighted_solve(design, response, &weights, nonnegative)?;
        let next_obj = objective(&next);
        if next_obj > obj + 1e-10 * obj.abs().max(1.0) {
            // IRWLS step failed to descend (numerical edge); keep previous
            iterations = iter - 1;
            break;
        }
        let delta = (&next - &beta).amax();
        let scale_beta = beta.amax().max(1.0);
        beta = next;
        obj = next_obj;
        trace.push(obj);
        weights = residuals(design, response, &beta)
            .iter()
            .map(|&r| bisquare_weight(r / scale, cfg.mm_tuning))
            .collect();
        if delta <= cfg.tol * scale_beta {
            converged = true;
            break;
        }
    }

    Ok(RobustFit {
        coefficients: beta,
        scale,
        weights,
        iterations,
        converged,
        degenerate_scale: false,
        objective_trace: trace,
    })
}
