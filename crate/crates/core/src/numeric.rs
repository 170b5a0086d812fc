//! Small numeric kernels shared across the crate: centered DFTs, polynomial
//! root finding, nonnegative least squares and seed-derived RNG streams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("length must be odd, got {0}")]
    EvenLength(usize),
    #[error("polynomial leading coefficient is numerically zero")]
    DegeneratePolynomial,
    #[error("root finding did not converge after {0} iterations")]
    RootsNotConverged(usize),
    #[error("nonnegative least squares did not terminate")]
    NnlsStalled,
    #[error("matrix is rank deficient")]
    RankDeficient,
}

/// SplitMix64 finalizer; used to derive independent sub-seeds.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG stream for `(seed, path...)`. Streams with different
/// paths are independent for all practical purposes.
pub fn rng_stream(seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = mix_seed(seed ^ 0x5353_5352_u64);
    for &p in path {
        state = mix_seed(state ^ mix_seed(p));
    }
    ChaCha8Rng::seed_from_u64(state)
}

/// Centered DFT of a real signal of odd length `n`.
///
/// Index `i` of the output corresponds to the symmetric bin
/// `l = i - (n-1)/2`, so the result of a real input is conjugate-symmetric
/// about its middle entry.
pub fn dft_centered(samples: &[f64]) -> Result<Vec<Complex64>, NumericError> {
    let n = samples.len();
    if n % 2 == 0 {
        return Err(NumericError::EvenLength(n));
    }
    let half = (n as i64 - 1) / 2;
    let table = twiddle_table(n);
    let mut out = Vec::with_capacity(n);
    for l in -half..=half {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, &x) in samples.iter().enumerate() {
            // e^{-j 2 pi idx l / n}
            let k = (idx as i64 * l).rem_euclid(n as i64) as usize;
            acc += table[k].conj() * x;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Inverse of [`dft_centered`]: real samples from a centered spectrum of odd
/// length. The imaginary residue of the sums (rounding-level for
/// conjugate-symmetric inputs) is discarded.
pub fn idft_centered(spectrum: &[Complex64]) -> Result<Vec<f64>, NumericError> {
    let n = spectrum.len();
    if n % 2 == 0 {
        return Err(NumericError::EvenLength(n));
    }
    let half = (n as i64 - 1) / 2;
    let table = twiddle_table(n);
    let scale = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &coeff) in spectrum.iter().enumerate() {
            let l = i as i64 - half;
            let k = (idx as i64 * l).rem_euclid(n as i64) as usize;
            acc += coeff * table[k];
        }
        out.push(acc.re * scale);
    }
    Ok(out)
}

fn twiddle_table(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

/// Roots of a complex polynomial `c[0] z^d + c[1] z^{d-1} + ... + c[d]` via
/// the Durand-Kerner iteration. Degrees here stay below ~10, where the plain
/// iteration is reliable.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, NumericError> {
    let lead = coeffs.first().copied().unwrap_or_default();
    if lead.norm() < 1e-12 {
        return Err(NumericError::DegeneratePolynomial);
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &monic {
            acc = acc * z + c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|i| seed.powu(i as u32 + 1)).collect();
    let max_iters = 600;
    for _ in 0..max_iters {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                // coincident iterates; nudge apart
                denom = Complex64::new(1e-300, 0.0);
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 {
            return Ok(roots);
        }
    }
    // Accept slightly looser convergence before giving up: re-check residuals.
    if roots.iter().all(|&r| eval(r).norm() < 1e-8) {
        return Ok(roots);
    }
    Err(NumericError::RootsNotConverged(max_iters))
}

/// Least-squares solution of `a x = b` via SVD with a rank guard.
///
/// Returns [`NumericError::RankDeficient`] when the smallest singular value
/// falls below `1e-12` relative to the largest.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NumericError> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 || smin < 1e-12 * smax {
        return Err(NumericError::RankDeficient);
    }
    svd.solve(b, 0.0).map_err(|_| NumericError::RankDeficient)
}

/// Minimum-norm least squares without the rank guard; used inside iterative
/// reweighting where transient rank collapse should not abort the fit.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, 1e-13 * smax)
        .unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Lawson-Hanson active-set nonnegative least squares: `min ||a x - b||`
/// subject to `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, NumericError> {
    let n = a.ncols();
    let mut passive = vec![false; n];
    let mut x = DVector::<f64>::zeros(n);
    let max_outer = 3 * n.max(1) + 10;
    let mut outer = 0;
    loop {
        let residual = b - a * &x;
        let grad = a.transpose() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && grad[j] > 1e-12 * grad.abs().max().max(1.0) {
                if best.map_or(true, |(_, g)| grad[j] > g) {
                    best = Some((j, grad[j]));
                }
            }
        }
        let Some((j_in, _)) = best else {
            return Ok(x);
        };
        passive[j_in] = true;
        outer += 1;
        if outer > max_outer {
            return Err(NumericError::NnlsStalled);
        }
        // Inner loop: solve on the passive set, clip variables that go
        // negative back onto the boundary.
        let mut inner = 0;
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(cols.iter());
            let z_sub = lstsq_min_norm(&sub, b);
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (idx, &j) in cols.iter().enumerate() {
                    x[j] = z_sub[idx];
                }
                break;
            }
            // step toward z until the first variable hits zero
            let mut alpha = f64::INFINITY;
            for (idx, &j) in cols.iter().enumerate() {
                if z_sub[idx] <= 0.0 {
                    let denom = x[j] - z_sub[idx];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = alpha.min(1.0).max(0.0);
            for (idx, &j) in cols.iter().enumerate() {
                x[j] += alpha * (z_sub[idx] - x[j]);
                if x[j] <= 1e-14 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            inner += 1;
            if inner > max_outer {
                return Err(NumericError::NnlsStalled);
            }
        }
    }
}

/// Singular values (descending) and the complete unitary right factor of a
/// complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexSvd {
    pub singular_values: Vec<f64>,
    /// `n x n` with orthonormal columns; column `j` pairs with
    /// `singular_values[j]`.
    pub v: DMatrix<Complex64>,
}

/// SVD of a complex matrix through its real embedding
/// `[[Re, -Im], [Im, Re]]`.
///
/// The embedding duplicates every singular value; the complex right-singular
/// vectors are recovered by un-embedding the real ones and re-orthogonalizing
/// over the complex field. This sidesteps the inaccurate native complex SVD
/// path and inherits the accuracy of the real bidiagonal QR.
pub fn complex_svd(a: &DMatrix<Complex64>) -> ComplexSvd {
    let (m, n) = a.shape();
    let rows = m.max(n); // pad wide inputs so the right factor is complete
    let mut embed = DMatrix::<f64>::zeros(2 * rows, 2 * n);
    for i in 0..m {
        for j in 0..n {
            let v = a[(i, j)];
            embed[(i, j)] = v.re;
            embed[(i, j + n)] = -v.im;
            embed[(i + rows, j)] = v.im;
            embed[(i + rows, j + n)] = v.re;
        }
    }
    let svd = embed.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let sv = svd.singular_values;
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    let mut col = 0usize;
    let mut cand = DVector::<Complex64>::zeros(n);
    for r in 0..2 * n {
        if col == n {
            break;
        }
        for i in 0..n {
            cand[i] = Complex64::new(v_t[(r, i)], v_t[(r, i + n)]);
        }
        // complex Gram-Schmidt; a second pass keeps the basis orthonormal
        for _ in 0..2 {
            for c in 0..col {
                let proj: Complex64 =
                    (0..n).map(|i| v[(i, c)].conj() * cand[i]).sum();
                for i in 0..n {
                    cand[i] -= proj * v[(i, c)];
                }
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            for i in 0..n {
                v[(i, col)] = cand[i] / norm;
            }
            values.push(sv[r]);
            col += 1;
        }
    }
    // pathological fallback: complete the basis from coordinate directions
    let mut axis = 0usize;
    while col < n && axis < n {
        for i in 0..n {
            cand[i] = Complex64::new(f64::from(i == axis), 0.0);
        }
        for _ in 0..2 {
            for c in 0..col {
                let proj: Complex64 = (0..n).map(|i| v[(i, c)].conj() * cand[i]).sum();
                for i in 0..n {
                    cand[i] -= proj * v[(i, c)];
                }
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            for i in 0..n {
                v[(i, col)] = cand[i] / norm;
            }
            values.push(0.0);
            col += 1;
        }
        axis += 1;
    }
    ComplexSvd {
        singular_values: values,
        v,
    }
}

/// Kernel (right null space) of a complex matrix as orthonormal columns.
///
/// Singular values at or below `tol` relative to the largest are treated as
/// zero.
pub fn null_space(a: &DMatrix<Complex64>, tol: f64) -> DMatrix<Complex64> {
    let cols = a.ncols();
    let svd = complex_svd(a);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let threshold = if smax > 0.0 { tol * smax } else { tol };
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= threshold)
        .collect();
    let mut basis = DMatrix::<Complex64>::zeros(cols, keep.len());
    for (out_col, &i) in keep.iter().enumerate() {
        basis.column_mut(out_col).copy_from(&svd.v.column(i));
    }
    basis
}
