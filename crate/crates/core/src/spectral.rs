//! Support estimation from spectra: Toeplitz (annihilating-filter)
//! embedding, alternating-projection denoising onto the rank-K Toeplitz set,
//! root-based location recovery, amplitude least squares, and the
//! decay-compensation step for exponentially shaped atoms.

use crate::numeric::{self, NumericError};
use crate::signal::{build_sensing_matrix, ModelKind, SignalError};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("need at least 2K+1 = {need} coefficients, got {got}")]
    TooFewCoefficients { need: usize, got: usize },
    #[error("model order must be at least 1")]
    OrderTooSmall,
    #[error("annihilating filter is numerically singular")]
    SingularModel,
    #[error("invalid search range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Centered symmetric-bin spectrum estimate with its model order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    coeffs: Vec<Complex64>,
    order: usize,
}

impl SpectrumEstimate {
    pub fn new(coeffs: Vec<Complex64>, order: usize) -> Result<Self, SpectralError> {
        if order < 1 {
            return Err(SpectralError::OrderTooSmall);
        }
        if coeffs.len() < 2 * order + 1 {
            return Err(SpectralError::TooFewCoefficients {
                need: 2 * order + 1,
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, order })
    }

    /// Centered DFT of a real sample vector (odd length).
    pub fn from_samples(samples: &[f64], order: usize) -> Result<Self, SpectralError> {
        let coeffs = numeric::dft_centered(samples)?;
        Self::new(coeffs, order)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Largest conjugate-symmetry violation `|c[i] - conj(c[L-1-i])|`.
    pub fn symmetry_residual(&self) -> f64 {
        let l = self.coeffs.len();
        (0..l)
            .map(|i| (self.coeffs[i] - self.coeffs[l - 1 - i].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Annihilating-filter arrangement: row `i`, column `j` holds
/// `coeffs[i + K - j]`, an `(L-K) x (K+1)` Toeplitz matrix that has rank `K`
/// exactly when the coefficients are a noiseless K-term exponential mixture.
pub fn toeplitz_embed(coeffs: &[Complex64], k: usize) -> Result<DMatrix<Complex64>, SpectralError> {
    if k < 1 {
        return Err(SpectralError::OrderTooSmall);
    }
    let l = coeffs.len();
    if l < 2 * k + 1 {
        return Err(SpectralError::TooFewCoefficients {
            need: 2 * k + 1,
            got: l,
        });
    }
    Ok(DMatrix::from_fn(l - k, k + 1, |i, j| coeffs[i + k - j]))
}

/// Ratio of the (K+1)-th to the largest singular value of the Toeplitz
/// embedding; zero for exactly rank-K inputs and for the all-zero input.
pub fn rank_ratio(coeffs: &[Complex64], k: usize) -> Result<f64, SpectralError> {
    let t = toeplitz_embed(coeffs, k)?;
    let svd = numeric::complex_svd(&t);
    let s = &svd.singular_values;
    if s[0] <= 0.0 || s.len() <= k {
        return Ok(0.0);
    }
    Ok(s[k] / s[0])
}

/// Result of the alternating-projection denoiser.
#[derive(Debug, Clone)]
pub struct CadzowOutcome {
    pub coeffs: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternates rank-K truncation of a Toeplitz window with diagonal
/// averaging (projection back onto Toeplitz structure), re-symmetrizing the
/// spectrum after each sweep, until the relative change drops below `tol` or
/// `max_iters` is reached. Non-convergence is reported in the outcome, not
/// as an error.
///
/// Denoising uses a near-square window, which constrains far more matrix
/// entries than the minimal annihilating arrangement; the width is a tuning
/// knob via [`cadzow_denoise_with_columns`].
pub fn cadzow_denoise(
    coeffs: &[Complex64],
    k: usize,
    max_iters: usize,
    tol: f64,
) -> Result<CadzowOutcome, SpectralError> {
    let columns = ((coeffs.len() + 1) / 2).max(k + 1);
    cadzow_denoise_with_columns(coeffs, k, columns, max_iters, tol)
}

/// [`cadzow_denoise`] with an explicit window width (`k + 1` recovers the
/// minimal annihilating arrangement).
pub fn cadzow_denoise_with_columns(
    coeffs: &[Complex64],
    k: usize,
    columns: usize,
    max_iters: usize,
    tol: f64,
) -> Result<CadzowOutcome, SpectralError> {
    let l = coeffs.len();
    if k < 1 {
        return Err(SpectralError::OrderTooSmall);
    }
    if l < 2 * k + 1 || columns < k + 1 || l + 1 < columns + k + 1 {
        return Err(SpectralError::TooFewCoefficients {
            need: 2 * k + 1,
            got: l,
        });
    }
    let norm0: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return Ok(CadzowOutcome {
            coeffs: coeffs.to_vec(),
            iterations: 0,
            converged: true,
        });
    }
    let rows = l - columns + 1;
    let mut current = coeffs.to_vec();
    for iter in 1..=max_iters {
        let t = DMatrix::from_fn(rows, columns, |i, j| current[i + columns - 1 - j]);
        let svd = numeric::complex_svd(&t);
        // rank-K truncation via projection onto the leading right-singular
        // subspace: T V_K V_K^H
        let keep = k.min(columns);
        let v_k = svd.v.columns(0, keep);
        let truncated = &t * (v_k * v_k.adjoint());
        // diagonal averaging back to a coefficient sequence
        let mut next = vec![Complex64::new(0.0, 0.0); l];
        let mut counts = vec![0usize; l];
        for i in 0..rows {
            for j in 0..columns {
                let s = i + columns - 1 - j;
                next[s] += truncated[(i, j)];
                counts[s] += 1;
            }
        }
        for (c, &count) in next.iter_mut().zip(&counts) {
            *c /= count as f64;
        }
        // restore conjugate symmetry of the centered spectrum
        for i in 0..(l + 1) / 2 {
            let j = l - 1 - i;
            let avg = (next[i] + next[j].conj()) * 0.5;
            next[i] = avg;
            next[j] = avg.conj();
        }
        let change: f64 = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = current.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        current = next;
        if change <= tol * scale.max(f64::MIN_POSITIVE) {
            return Ok(CadzowOutcome {
                coeffs: current,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(CadzowOutcome {
        coeffs: current,
        iterations: max_iters,
        converged: false,
    })
}

/// Spike locations from approximately rank-K coefficients: the annihilating
/// filter is the right singular vector of the Toeplitz embedding for the
/// smallest singular value; its polynomial roots map to locations
/// `t = (-arg(root) / 2 pi) mod 1`, sorted ascending.
pub fn prony(coeffs: &[Complex64], k: usize) -> Result<Vec<f64>, SpectralError> {
    let t = toeplitz_embed(coeffs, k)?;
    let svd = numeric::complex_svd(&t);
    // filter = right singular vector for the smallest singular value
    let last = svd.v.ncols() - 1;
    let filter: Vec<Complex64> = (0..svd.v.nrows()).map(|i| svd.v[(i, last)]).collect();
    if filter[0].norm() < 1e-12 {
        return Err(SpectralError::SingularModel);
    }
    let roots = numeric::polynomial_roots(&filter).map_err(|e| match e {
        NumericError::DegeneratePolynomial => SpectralError::SingularModel,
        other => SpectralError::Numeric(other),
    })?;
    let mut locations: Vec<f64> = roots
        .iter()
        .map(|r| {
            if r.norm() < 1e-12 {
                return Err(SpectralError::SingularModel);
            }
            Ok((-r.arg() / (2.0 * PI)).rem_euclid(1.0))
        })
        .collect::<Result<_, _>>()?;
    locations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(locations)
}

/// Least-squares (optionally nonnegative) amplitudes for known locations.
pub fn amplitude_lsq(
    samples: &[f64],
    locations: &[f64],
    kind: &ModelKind,
    nonnegative: bool,
) -> Result<Vec<f64>, SpectralError> {
    let model = build_sensing_matrix(locations, kind, samples.len())?;
    let y = DVector::from_column_slice(samples);
    let weights = if nonnegative {
        numeric::nnls(model.matrix(), &y)?
    } else {
        numeric::lstsq(model.matrix(), &y).map_err(|e| match e {
            NumericError::RankDeficient => SpectralError::RankDeficient,
            other => SpectralError::Numeric(other),
        })?
    };
    Ok(weights.iter().copied().collect())
}

/// Bin-wise multiplication by `alpha + j 2 pi l` at the symmetric bins;
/// exact inverse of the attenuation applied by the decaying-exponential
/// synthesis.
pub fn decay_compensate(spectrum: &SpectrumEstimate, alpha: f64) -> SpectrumEstimate {
    let l = spectrum.coeffs.len();
    let half = (l as i64 - 1) / 2;
    let coeffs = spectrum
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| c * Complex64::new(alpha, 2.0 * PI * (i as i64 - half) as f64))
        .collect();
    SpectrumEstimate {
        coeffs,
        order: spectrum.order,
    }
}

/// Step-1 pipeline for one sample vector: centered DFT, decay compensation
/// when the model is exponential, alternating-projection denoising,
/// root-based location recovery, and a local least-squares polish of the
/// locations against the samples. Near-coincident locations (within the
/// sensing-matrix duplicate tolerance) are merged.
pub fn estimate_support(
    samples: &[f64],
    k: usize,
    kind: &ModelKind,
    cadzow_iters: usize,
    cadzow_tol: f64,
) -> Result<Vec<f64>, SpectralError> {
    let mut spectrum = SpectrumEstimate::from_samples(samples, k)?;
    if let ModelKind::DecayingExponential { alpha } = *kind {
        spectrum = decay_compensate(&spectrum, alpha);
    }
    let denoised = cadzow_denoise(spectrum.coefficients(), k, cadzow_iters, cadzow_tol)?;
    let locations = prony(&denoised.coeffs, k)?;
    let locations = merge_close_locations(locations, 1e-9);
    let polished = polish_locations(samples, &locations, kind, 30)?;
    Ok(merge_close_locations(polished, 1e-9))
}

/// Gauss-Newton refinement of spike locations by the sample-domain
/// least-squares fit (amplitudes solved exactly at every step). The step is
/// halved until the residual decreases; locations wrap modulo one. Exact
/// inputs are fixed points.
pub fn polish_locations(
    samples: &[f64],
    locations: &[f64],
    kind: &ModelKind,
    max_iters: usize,
) -> Result<Vec<f64>, SpectralError> {
    let n = samples.len();
    let k = locations.len();
    if k == 0 || n < 2 * k {
        return Ok(locations.to_vec());
    }
    let y = DVector::from_column_slice(samples);
    let half = (n as i64 - 1) / 2;
    // samples of d(atom)/dt: inverse DFT of -j 2 pi l' times the atom spectrum
    let atom_derivative = |t: f64| -> Result<Vec<f64>, SpectralError> {
        let spike = crate::signal::DiracStream::new(vec![t], vec![1.0])?;
        let mut spec = crate::signal::stream_spectrum(&spike, kind, n)?;
        for (i, c) in spec.iter_mut().enumerate() {
            let l = (i as i64 - half) as f64;
            *c *= Complex64::new(0.0, -2.0 * PI * l);
        }
        Ok(crate::numeric::idft_centered(&spec)?)
    };
    let fit = |locs: &[f64]| -> Result<(f64, DVector<f64>, DMatrix<f64>), SpectralError> {
        let model = build_sensing_matrix(locs, kind, n)?;
        let amps = numeric::lstsq_min_norm(model.matrix(), &y);
        let residual = &y - model.matrix() * &amps;
        Ok((residual.norm_squared(), amps, model.matrix().clone()))
    };
    let mut current: Vec<f64> = locations.to_vec();
    let (mut objective, mut amps, _) = match fit(&current) {
        Ok(v) => v,
        Err(_) => return Ok(current),
    };
    for _ in 0..max_iters {
        // Gauss-Newton step on the locations with amplitudes eliminated
        let mut jacobian = DMatrix::<f64>::zeros(n, k);
        for (col, &t) in current.iter().enumerate() {
            let d = atom_derivative(t)?;
            for i in 0..n {
                jacobian[(i, col)] = amps[col] * d[i];
            }
        }
        let model = match build_sensing_matrix(&current, kind, n) {
            Ok(m) => m,
            Err(_) => break,
        };
        let residual = &y - model.matrix() * &amps;
        let step = numeric::lstsq_min_norm(&jacobian, &residual);
        if !step.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let candidate: Vec<f64> = current
                .iter()
                .zip(step.iter())
                .map(|(&t, &d)| (t + scale * d).rem_euclid(1.0))
                .collect();
            match fit(&candidate) {
                Ok((obj, a, _)) if obj < objective => {
                    let delta: f64 = candidate
                        .iter()
                        .zip(&current)
                        .map(|(a, b)| {
                            let d = (a - b).abs();
                            d.min(1.0 - d)
                        })
                        .fold(0.0, f64::max);
                    current = candidate;
                    objective = obj;
                    amps = a;
                    improved = true;
                    if delta < 1e-12 {
                        let mut sorted = current;
                        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        return Ok(sorted);
                    }
                    break;
                }
                _ => scale *= 0.5,
            }
        }
        if !improved {
            break;
        }
    }
    current.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(current)
}

/// Collapses locations that coincide within `tol` (circularly), keeping the
/// first representative of each cluster.
pub fn merge_close_locations(mut locations: Vec<f64>, tol: f64) -> Vec<f64> {
    locations.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut merged: Vec<f64> = Vec::with_capacity(locations.len());
    for t in locations {
        let dup = merged.iter().any(|&u| {
            let d = (t - u).abs();
            d.min(1.0 - d) < tol
        });
        if !dup {
            merged.push(t);
        }
    }
    merged
}

/// Golden-section search for the decay rate: minimizes the rank-deficiency
/// ratio of the Toeplitz embedding after compensation. Exact at the true
/// rate for noiseless data.
pub fn estimate_alpha(
    samples: &[f64],
    k: usize,
    alpha_range: (f64, f64),
) -> Result<f64, SpectralError> {
    let (mut lo, mut hi) = alpha_range;
    if !(lo > 0.0) || !(hi > lo) {
        return Err(SpectralError::InvalidRange(lo, hi));
    }
    let spectrum = SpectrumEstimate::from_samples(samples, k)?;
    let objective = |alpha: f64| -> Result<f64, SpectralError> {
        let compensated = decay_compensate(&spectrum, alpha);
        rank_ratio(compensated.coefficients(), k)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let mut fa = objective(a)?;
    let mut fb = objective(b)?;
    while (hi - lo) >= 1e-4 * lo {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = objective(a)?;
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = objective(b)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, DiracStream};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn mixture_coeffs(locations: &[f64], weights: &[f64], l: usize) -> Vec<Complex64> {
        let stream = DiracStream::new(locations.to_vec(), weights.to_vec()).unwrap();
        let half = (l as i64 - 1) / 2;
        (-half..=half).map(|ell| stream.fs_coefficient(ell)).collect()
    }

    #[test]
    fn toeplitz_embedding_shape_and_rank() {
        let c1 = mixture_coeffs(&[0.3], &[1.0], 9);
        let t = toeplitz_embed(&c1, 1).unwrap();
        assert_eq!((t.nrows(), t.ncols()), (8, 2));
        assert!(rank_ratio(&c1, 1).unwrap() <= 1e-10);

        let c2 = mixture_coeffs(&[0.2, 0.75], &[1.0, 0.4], 11);
        assert!(rank_ratio(&c2, 2).unwrap() <= 1e-9);

        // random coefficients are generically full rank
        let mut rng = crate::numeric::rng_stream(11, &[]);
        let noise: Vec<Complex64> = (0..11)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        assert!(rank_ratio(&noise, 2).unwrap() > 1e-3);
    }

    #[test]
    fn toeplitz_embed_rejects_short_input() {
        let c = mixture_coeffs(&[0.3], &[1.0], 9);
        assert!(matches!(
            toeplitz_embed(&c[..4], 2),
            Err(SpectralError::TooFewCoefficients { .. })
        ));
    }

    #[test]
    fn cadzow_fixed_point_on_noiseless_input() {
        let c = mixture_coeffs(&[0.2, 0.9], &[1.0, 0.5], 15);
        let out = cadzow_denoise(&c, 2, 50, 1e-12).unwrap();
        assert!(out.converged);
        for (a, b) in out.coeffs.iter().zip(&c) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn cadzow_zero_input_stays_zero() {
        let zeros = vec![Complex64::new(0.0, 0.0); 9];
        let out = cadzow_denoise(&zeros, 1, 20, 1e-10).unwrap();
        assert!(out.converged);
        assert!(out.coeffs.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn cadzow_improves_noisy_coefficients() {
        // K=1 exponential plus 20 dB complex noise: denoised error smaller
        // than input error in at least 95% of 200 seeded draws.
        let clean = mixture_coeffs(&[0.37], &[1.0], 21);
        let signal_power: f64 =
            clean.iter().map(|c| c.norm_sqr()).sum::<f64>() / clean.len() as f64;
        let sigma = (signal_power * 10f64.powf(-20.0 / 10.0) / 2.0).sqrt();
        let mut improved = 0;
        let trials = 200;
        for seed in 0..trials {
            let mut rng = crate::numeric::rng_stream(seed, &[42]);
            let noisy: Vec<Complex64> = clean
                .iter()
                .map(|&c| {
                    c + Complex64::new(
                        sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
                        sigma * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    )
                })
                .collect();
            // re-symmetrize the noise so the input is a legal real-signal spectrum
            let l = noisy.len();
            let noisy: Vec<Complex64> = (0..l)
                .map(|i| (noisy[i] + noisy[l - 1 - i].conj()) * 0.5)
                .collect();
            let out = cadzow_denoise(&noisy, 1, 100, 1e-10).unwrap();
            let err_in: f64 = noisy
                .iter()
                .zip(&clean)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            let err_out: f64 = out
                .coeffs
                .iter()
                .zip(&clean)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            if err_out < err_in {
                improved += 1;
            }
        }
        assert!(improved * 100 >= trials * 95, "improved {improved}/{trials}");
    }

    #[test]
    fn cadzow_never_increases_rank_ratio() {
        let clean = mixture_coeffs(&[0.1, 0.55, 0.8], &[1.0, 0.7, 0.3], 17);
        for seed in 0..20 {
            let mut rng = crate::numeric::rng_stream(seed, &[7]);
            let l = clean.len();
            let noisy: Vec<Complex64> = clean
                .iter()
                .map(|&c| {
                    c + Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.3
                })
                .collect();
            let noisy: Vec<Complex64> = (0..l)
                .map(|i| (noisy[i] + noisy[l - 1 - i].conj()) * 0.5)
                .collect();
            let before = rank_ratio(&noisy, 3).unwrap();
            let out = cadzow_denoise(&noisy, 3, 2000, 1e-10).unwrap();
            let after = rank_ratio(&out.coeffs, 3).unwrap();
            assert!(
                after <= before + 1e-12,
                "ratio increased {before} -> {after}"
            );
            if out.converged {
                assert!(after <= 1e-6, "converged output not near rank K: {after}");
            }
        }
    }

    #[test]
    fn prony_recovers_noiseless_locations() {
        let c = mixture_coeffs(&[0.3], &[1.0], 9);
        let locs = prony(&c, 1).unwrap();
        assert_eq!(locs.len(), 1);
        assert_abs_diff_eq!(locs[0], 0.3, epsilon = 1e-10);

        let c = mixture_coeffs(&[0.0], &[1.0], 9);
        let locs = prony(&c, 1).unwrap();
        assert_abs_diff_eq!(locs[0], 0.0, epsilon = 1e-10);

        let c = mixture_coeffs(&[0.2, 0.9], &[1.0, 0.5], 11);
        let locs = prony(&c, 2).unwrap();
        assert_abs_diff_eq!(locs[0], 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(locs[1], 0.9, epsilon = 1e-9);
    }

    #[test]
    fn prony_rejects_order_zero() {
        let c = mixture_coeffs(&[0.3], &[1.0], 9);
        assert!(matches!(prony(&c, 0), Err(SpectralError::OrderTooSmall)));
    }

    #[test]
    fn forward_inverse_identity_with_amplitudes() {
        // any stream with K <= (N-1)/2 and separation >= 0.02 round-trips
        let n = 21;
        for seed in 0..15u64 {
            let mut rng = crate::numeric::rng_stream(seed, &[3]);
            let k = 1 + (seed as usize % 3);
            let mut locations: Vec<f64> = Vec::new();
            while locations.len() < k {
                let t: f64 = rng.gen();
                let ok = locations.iter().all(|&u: &f64| {
                    let d = (t - u).abs();
                    d.min(1.0 - d) >= 0.05
                });
                if ok {
                    locations.push(t);
                }
            }
            let weights: Vec<f64> = (0..k).map(|_| 0.5 + 0.5 * rng.gen::<f64>()).collect();
            let stream = DiracStream::new(locations.clone(), weights.clone()).unwrap();
            let x = synthesize(&stream, &ModelKind::Dirac, n).unwrap();
            let spec = SpectrumEstimate::from_samples(&x, k).unwrap();
            let mut found = prony(spec.coefficients(), k).unwrap();
            let mut expected = locations.clone();
            expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
            found.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (f, e) in found.iter().zip(&expected) {
                assert_abs_diff_eq!(f, e, epsilon = 1e-9);
            }
            let amps = amplitude_lsq(&x, &found, &ModelKind::Dirac, false).unwrap();
            let mut expected_w: Vec<(f64, f64)> =
                locations.iter().copied().zip(weights.iter().copied()).collect();
            expected_w.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for (a, (_, w)) in amps.iter().zip(&expected_w) {
                assert_abs_diff_eq!(a, w, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn amplitude_lsq_nonnegative_matches_unconstrained_for_positive_truth() {
        let locations = vec![0.15, 0.6];
        let stream = DiracStream::new(locations.clone(), vec![0.8, 0.6]).unwrap();
        let x = synthesize(&stream, &ModelKind::Dirac, 15).unwrap();
        let free = amplitude_lsq(&x, &locations, &ModelKind::Dirac, false).unwrap();
        let nn = amplitude_lsq(&x, &locations, &ModelKind::Dirac, true).unwrap();
        for (a, b) in free.iter().zip(&nn) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn amplitude_lsq_matches_normal_equations_on_noisy_data() {
        let locations = vec![0.2, 0.7];
        let stream = DiracStream::new(locations.clone(), vec![1.0, 0.9]).unwrap();
        let mut x = synthesize(&stream, &ModelKind::Dirac, 21).unwrap();
        let mut rng = crate::numeric::rng_stream(5, &[]);
        for v in &mut x {
            *v += 0.01 * (rng.gen::<f64>() - 0.5);
        }
        let fitted = amplitude_lsq(&x, &locations, &ModelKind::Dirac, false).unwrap();
        // dense normal-equations oracle
        let e = build_sensing_matrix(&locations, &ModelKind::Dirac, 21).unwrap();
        let m = e.matrix();
        let gram = m.transpose() * m;
        let rhs = m.transpose() * DVector::from_column_slice(&x);
        let oracle = gram.lu().solve(&rhs).unwrap();
        for (a, b) in fitted.iter().zip(oracle.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn decay_compensate_inverts_attenuation() {
        let c = mixture_coeffs(&[0.2, 0.6], &[1.0, 0.7], 13);
        let spec = SpectrumEstimate::new(c.clone(), 2).unwrap();
        let alpha = 11.18;
        let half = 6i64;
        let attenuated: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(i, &v)| v / Complex64::new(alpha, 2.0 * PI * (i as i64 - half) as f64))
            .collect();
        let att = SpectrumEstimate::new(attenuated, 2).unwrap();
        let restored = decay_compensate(&att, alpha);
        for (a, b) in restored.coefficients().iter().zip(spec.coefficients()) {
            assert!((a - b).norm() < 1e-12);
        }
        // DC bin is multiplied by exactly alpha
        let dc_in = att.coefficients()[6];
        let dc_out = restored.coefficients()[6];
        assert!((dc_out - dc_in * alpha).norm() < 1e-12);
    }

    #[test]
    fn estimate_alpha_recovers_truth_on_noiseless_trace() {
        let alpha = 11.18;
        let stream = DiracStream::new(vec![0.2, 0.55, 0.8], vec![1.0, 0.7, 0.9]).unwrap();
        let kind = ModelKind::decaying(alpha).unwrap();
        let x = synthesize(&stream, &kind, 121).unwrap();
        let est = estimate_alpha(&x, 3, (1.0, 50.0)).unwrap();
        assert!((est - alpha).abs() / alpha < 0.01, "estimate {est}");
        // objective at truth no worse than at twice the truth
        let spec = SpectrumEstimate::from_samples(&x, 3).unwrap();
        let at_truth = rank_ratio(decay_compensate(&spec, alpha).coefficients(), 3).unwrap();
        let at_double = rank_ratio(decay_compensate(&spec, 2.0 * alpha).coefficients(), 3).unwrap();
        assert!(at_truth <= at_double);
    }

    #[test]
    fn estimate_alpha_rejects_bad_range() {
        let x = vec![0.0; 9];
        assert!(matches!(
            estimate_alpha(&x, 1, (2.0, 1.0)),
            Err(SpectralError::InvalidRange(..))
        ));
    }

    #[test]
    fn polish_is_a_fixed_point_on_exact_locations() {
        let locations = vec![0.15, 0.42, 0.8];
        let stream = DiracStream::new(locations.clone(), vec![1.0, 0.6, 0.9]).unwrap();
        let x = synthesize(&stream, &ModelKind::Dirac, 31).unwrap();
        let polished = polish_locations(&x, &locations, &ModelKind::Dirac, 20).unwrap();
        for (p, t) in polished.iter().zip(&locations) {
            assert_abs_diff_eq!(p, t, epsilon = 1e-11);
        }
    }

    #[test]
    fn polish_improves_perturbed_locations() {
        let mut improved = 0;
        let trials = 30;
        for seed in 0..trials {
            let mut rng = crate::numeric::rng_stream(seed, &[0x70]);
            let truth = vec![0.1 + 0.02 * rng.gen::<f64>(), 0.55, 0.85];
            let stream = DiracStream::new(truth.clone(), vec![1.0, 0.7, 0.8]).unwrap();
            let mut x = synthesize(&stream, &ModelKind::Dirac, 61).unwrap();
            for v in &mut x {
                *v += 0.001 * (rng.gen::<f64>() - 0.5);
            }
            let start: Vec<f64> = truth.iter().map(|t| t + 0.003).collect();
            let polished = polish_locations(&x, &start, &ModelKind::Dirac, 30).unwrap();
            let err = |locs: &[f64]| -> f64 {
                locs.iter()
                    .zip(&truth)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            if err(&polished) < err(&start) {
                improved += 1;
            }
        }
        assert!(improved * 10 >= trials * 9, "improved {improved}/{trials}");
    }
}
