//! Executable checks of the recovery theory at enumerable sizes: genericity
//! of sensing matrices (every K x K row submatrix invertible), the
//! closed-form determinant of Fourier-Vandermonde submatrices, and a
//! brute-force uniqueness oracle for structured cross-channel permutations.

use crate::numeric::{self, complex_svd};
use crate::shuffle::ShuffleAssignment;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("enumeration budget exceeded: C({n}, {k}) > {budget}")]
    EnumerationBudget { n: usize, k: usize, budget: u64 },
    #[error("dense budget exceeded: M*N = {0} > 64")]
    DenseBudget(usize),
    #[error("matrix must be tall (rows {rows} >= cols {cols})")]
    NotTall { rows: usize, cols: usize },
    #[error("row index set and node set differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("row index {0} out of range for N = {1}")]
    RowOutOfRange(usize, usize),
    #[error("nodes must be pairwise distinct")]
    CoincidentNodes,
    #[error("node {index} has v^N = {value} too close to +-1")]
    ForbiddenNode { index: usize, value: f64 },
    #[error("could not draw a generic matrix after {0} attempts")]
    GenericDrawFailed(usize),
}

/// Outcome of the exhaustive submatrix rank check.
#[derive(Debug, Clone)]
pub struct GenericityReport {
    pub is_generic: bool,
    /// Row indices of the submatrix with the smallest singular-value ratio.
    pub worst_submatrix: Vec<usize>,
    /// Smallest `sigma_K / sigma_1` over all K x K row submatrices.
    pub min_singular_ratio: f64,
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
        if acc > u64::MAX / 2 {
            return u64::MAX;
        }
    }
    acc
}

const ENUMERATION_BUDGET: u64 = 1_000_000;

/// Enumerates every `K x K` row submatrix and reports rank through the
/// singular-value ratio against `tolerance` (relative to each submatrix's
/// largest singular value).
pub fn is_generic(
    e: &DMatrix<Complex64>,
    tolerance: f64,
) -> Result<GenericityReport, TheoryError> {
    let (n, k) = e.shape();
    if n < k {
        return Err(TheoryError::NotTall { rows: n, cols: k });
    }
    if binomial(n, k) > ENUMERATION_BUDGET {
        return Err(TheoryError::EnumerationBudget {
            n,
            k,
            budget: ENUMERATION_BUDGET,
        });
    }
    let mut combo: Vec<usize> = (0..k).collect();
    let mut worst_ratio = f64::INFINITY;
    let mut worst: Vec<usize> = combo.clone();
    loop {
        let sub = e.select_rows(combo.iter());
        let svd = complex_svd(&sub);
        let s = &svd.singular_values;
        let ratio = if s[0] > 0.0 { s[k - 1] / s[0] } else { 0.0 };
        if ratio < worst_ratio {
            worst_ratio = ratio;
            worst = combo.clone();
        }
        // next lexicographic combination
        let mut i = k;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if combo[i] != n - k + i {
                combo[i] += 1;
                for j in i + 1..k {
                    combo[j] = combo[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    Ok(GenericityReport {
        is_generic: worst_ratio > tolerance,
        worst_submatrix: worst,
        min_singular_ratio: worst_ratio,
    })
}

/// The product of the unscaled inverse-DFT matrix (`omega^{i l}`,
/// `omega = exp(j 2 pi / N)`) with the Vandermonde matrix of the given
/// nodes, built by direct summation.
pub fn fourier_vandermonde(nodes: &[Complex64], n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, nodes.len(), |i, k| {
        let omega_i = Complex64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for _ in 0..n {
            acc += term;
            term *= nodes[k] * omega_i;
        }
        acc
    })
}

/// Log-determinant of the `K x K` row submatrix of the Fourier-Vandermonde
/// product, from the Cauchy-matrix closed form, evaluated in log-space.
/// Nonzero whenever the nodes are distinct and no `v^N` equals plus or
/// minus one.
pub fn cauchy_logdet(
    rows: &[usize],
    nodes: &[Complex64],
    n: usize,
) -> Result<Complex64, TheoryError> {
    let k = rows.len();
    if k != nodes.len() {
        return Err(TheoryError::LengthMismatch(k, nodes.len()));
    }
    for &r in rows {
        if r >= n {
            return Err(TheoryError::RowOutOfRange(r, n));
        }
    }
    for (i, v) in nodes.iter().enumerate() {
        let vn = v.powu(n as u32);
        if (vn - 1.0).norm() < 1e-12 || (vn + 1.0).norm() < 1e-12 {
            return Err(TheoryError::ForbiddenNode {
                index: i,
                value: vn.re,
            });
        }
        for w in &nodes[i + 1..] {
            if (v - w).norm() < 1e-12 {
                return Err(TheoryError::CoincidentNodes);
            }
        }
    }
    let omega = |p: f64| Complex64::from_polar(1.0, 2.0 * PI * p / n as f64);
    let mut logdet = Complex64::new(0.0, 0.0);
    for v in nodes {
        logdet += (Complex64::new(1.0, 0.0) - v.powu(n as u32)).ln();
    }
    for i in 0..k {
        for j in 0..i {
            // pairwise differences of omega^{-l} and of the nodes
            logdet += (omega(-(rows[i] as f64)) - omega(-(rows[j] as f64))).ln();
            logdet += (nodes[j] - nodes[i]).ln();
        }
    }
    for &r in rows {
        logdet -= omega(r as f64).ln();
    }
    for &r in rows {
        for v in nodes {
            logdet -= (omega(-(r as f64)) - v).ln();
        }
    }
    Ok(logdet)
}

/// A pair of coefficient configurations, not related by a channel renaming,
/// that the permutation maps to the same observations.
#[derive(Debug, Clone)]
pub struct AmbiguousPair {
    /// Stacked blocks of the first configuration.
    pub beta_first: DVector<Complex64>,
    /// Stacked blocks of the second configuration.
    pub beta_second: DVector<Complex64>,
    /// `|| Pi A beta_first - A beta_second ||`, near zero by construction.
    pub residual: f64,
}

/// Verdict of the uniqueness check.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// True iff every solution pair is a channel renaming.
    pub unique: bool,
    /// For the two-channel non-unique case, a concrete witness.
    pub ambiguous: Option<AmbiguousPair>,
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut all = Vec::new();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut stack = vec![0usize; m + 1];
    all.push(perm.clone());
    let mut i = 0;
    while i < m {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            all.push(perm.clone());
            stack[i] += 1;
            i = 0;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    all
}

fn block_permutation(perm: &[usize], k: usize) -> DMatrix<Complex64> {
    let m = perm.len();
    let mut p = DMatrix::<Complex64>::zeros(m * k, m * k);
    for (row_block, &col_block) in perm.iter().enumerate() {
        for i in 0..k {
            p[(row_block * k + i, col_block * k + i)] = Complex64::new(1.0, 0.0);
        }
    }
    p
}

fn block_diag(e: &DMatrix<Complex64>, m: usize) -> DMatrix<Complex64> {
    let (n, k) = e.shape();
    let mut a = DMatrix::<Complex64>::zeros(m * n, m * k);
    for b in 0..m {
        a.view_mut((b * n, b * k), (n, k)).copy_from(e);
    }
    a
}

const KERNEL_TOL: f64 = 1e-9;

/// Checks whether the relation `Pi A beta'' = A beta'` forces a channel
/// renaming: computes a kernel basis of the stacked map `[Pi A | -A]` and
/// tests its containment in one of the renaming subspaces
/// `{(beta, P_sigma beta) : Pi A beta = A P_sigma beta}`.
///
/// For two channels, a failed check emits the explicit ambiguous pair built
/// from null vectors of the preserved/swapped row blocks.
pub fn uniqueness_oracle(
    e: &DMatrix<Complex64>,
    assignment: &ShuffleAssignment,
) -> Result<UniquenessReport, TheoryError> {
    let m = assignment.channel_count();
    let n = assignment.sample_count();
    if m * n > 64 {
        return Err(TheoryError::DenseBudget(m * n));
    }
    if e.nrows() != n {
        return Err(TheoryError::LengthMismatch(e.nrows(), n));
    }
    let k = e.ncols();
    let pi = assignment.to_dense().map(|v| Complex64::new(v, 0.0));
    let a = block_diag(e, m);
    let pi_a = &pi * &a;
    // stacked map [Pi A | -A]
    let mut stacked = DMatrix::<Complex64>::zeros(m * n, 2 * m * k);
    stacked.view_mut((0, 0), (m * n, m * k)).copy_from(&pi_a);
    stacked
        .view_mut((0, m * k), (m * n, m * k))
        .copy_from(&(-&a));
    let kernel = numeric::null_space(&stacked, KERNEL_TOL);
    let mut unique = false;
    'sigma: for perm in permutations(m) {
        let p = block_permutation(&perm, k);
        let constraint = &pi_a - &a * &p;
        let w = numeric::null_space(&constraint, KERNEL_TOL);
        // lift to orthonormal columns (beta, P beta) / sqrt(2)
        let mut lifted = DMatrix::<Complex64>::zeros(2 * m * k, w.ncols());
        let scale = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        for c in 0..w.ncols() {
            let beta = w.column(c).clone_owned();
            let permuted = &p * &beta;
            for i in 0..m * k {
                lifted[(i, c)] = beta[i] * scale;
                lifted[(m * k + i, c)] = permuted[i] * scale;
            }
        }
        for c in 0..kernel.ncols() {
            let v = kernel.column(c);
            let coeffs = lifted.adjoint() * v;
            let residual = (v - &lifted * coeffs).norm();
            if residual > KERNEL_TOL {
                continue 'sigma;
            }
        }
        unique = true;
        break;
    }
    let ambiguous = if !unique && m == 2 {
        two_channel_witness(e, assignment, &pi_a, &a)
    } else {
        None
    };
    Ok(UniquenessReport { unique, ambiguous })
}

/// Converse construction for two channels: picks nonzero elements of the
/// column space vanishing on the preserved (resp. swapped) coordinates and
/// assembles the ambiguous pair.
fn two_channel_witness(
    e: &DMatrix<Complex64>,
    assignment: &ShuffleAssignment,
    pi_a: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
) -> Option<AmbiguousPair> {
    let n = assignment.sample_count();
    let k = e.ncols();
    let preserved: Vec<usize> = (0..n).filter(|&p| assignment.get(0, 0, p) == 1).collect();
    let swapped: Vec<usize> = (0..n).filter(|&p| assignment.get(0, 0, p) == 0).collect();
    let null_on = |rows: &[usize]| -> Option<DVector<Complex64>> {
        if rows.is_empty() {
            // empty restriction: any coefficient vector qualifies
            let mut v = DVector::<Complex64>::zeros(k);
            v[0] = Complex64::new(1.0, 0.0);
            return Some(v);
        }
        let sub = e.select_rows(rows.iter());
        let basis = numeric::null_space(&sub, KERNEL_TOL);
        if basis.ncols() == 0 {
            None
        } else {
            Some(basis.column(0).clone_owned())
        }
    };
    // x1'' in ker(rho) cap col(E): vanishes on preserved rows
    let beta1 = null_on(&preserved)?;
    // x2'' in ker(rho_perp) cap col(E): vanishes on swapped rows
    let beta2 = null_on(&swapped)?;
    let mut beta_first = DVector::<Complex64>::zeros(2 * k);
    let mut beta_second = DVector::<Complex64>::zeros(2 * k);
    for i in 0..k {
        beta_first[i] = beta1[i];
        beta_first[k + i] = beta2[i];
        // x1' = 0, x2' = x1'' + x2''
        beta_second[k + i] = beta1[i] + beta2[i];
    }
    let residual = (pi_a * &beta_first - a * &beta_second).norm();
    // reject a witness that is itself a renaming (should not happen)
    let direct = (&beta_second - &beta_first).norm();
    let mut swapped_cfg = DVector::<Complex64>::zeros(2 * k);
    for i in 0..k {
        swapped_cfg[i] = beta_first[k + i];
        swapped_cfg[k + i] = beta_first[i];
    }
    let renamed = (&beta_second - &swapped_cfg).norm();
    if direct < 1e-9 || renamed < 1e-9 {
        return None;
    }
    Some(AmbiguousPair {
        beta_first,
        beta_second,
        residual,
    })
}

/// One row of the sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    /// Number of preserved coordinates.
    pub preserved: usize,
    pub unique: bool,
    /// The closed-form condition `K <= max(r, N - r)`.
    pub expected: bool,
    pub matches: bool,
    /// Set when the converse construction produced a verified witness.
    pub witness_residual: Option<f64>,
}

/// Draws a random generic complex Gaussian matrix, re-verified by
/// [`is_generic`].
pub fn random_generic_matrix(
    n: usize,
    k: usize,
    seed: u64,
) -> Result<DMatrix<Complex64>, TheoryError> {
    let mut rng = numeric::rng_stream(seed, &[0x6765_6e]);
    for _ in 0..32 {
        let e = DMatrix::from_fn(n, k, |_, _| {
            Complex64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            )
        });
        if is_generic(&e, 1e-10)?.is_generic {
            return Ok(e);
        }
    }
    Err(TheoryError::GenericDrawFailed(32))
}

/// For every preserved-count `r`, draws a random mask and a random generic
/// matrix, runs the oracle and compares the verdict with the closed-form
/// condition.
pub fn proposition1_sweep(n: usize, k: usize, seed: u64) -> Result<Vec<SweepRow>, TheoryError> {
    let mut rows = Vec::with_capacity(n + 1);
    for r in 0..=n {
        let e = random_generic_matrix(n, k, numeric::mix_seed(seed ^ (r as u64) << 8))?;
        let mask = crate::shuffle::TwoChannelMask::random(n, n - r, seed ^ 0xace0 ^ r as u64)
            .expect("count in range");
        let report = uniqueness_oracle(&e, &mask.to_assignment())?;
        let expected = k <= r.max(n - r);
        rows.push(SweepRow {
            preserved: r,
            unique: report.unique,
            expected,
            matches: report.unique == expected,
            witness_residual: report.ambiguous.as_ref().map(|w| w.residual),
        });
    }
    Ok(rows)
}
