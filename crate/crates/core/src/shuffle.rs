//! Cross-channel permutations: for every sample index `p` an `M x M`
//! permutation matrix decides which channel each recorded value came from.
//! Stored as the binary tensor of per-sample slices; dense reconstruction is
//! provided for test oracles.

use crate::numeric;
use crate::signal::{MultiChannelFrame, SignalError};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShuffleError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("shuffled count {count} out of range for {n} samples")]
    CountOutOfRange { count: usize, n: usize },
    #[error("mask entries must be 0 or 1")]
    NonBinaryEntry,
    #[error("channel count {0} must be at least 2")]
    TooFewChannels(usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Binary tensor `Q[m][n][p]`: value 1 means channel `m` of the shuffled
/// frame takes sample `p` from channel `n` of the underlying frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleAssignment {
    channels: usize,
    samples: usize,
    data: Vec<u8>,
}

impl ShuffleAssignment {
    pub fn zeros(channels: usize, samples: usize) -> Self {
        Self {
            channels,
            samples,
            data: vec![0; channels * channels * samples],
        }
    }

    pub fn identity(channels: usize, samples: usize) -> Self {
        let mut a = Self::zeros(channels, samples);
        for m in 0..channels {
            for p in 0..samples {
                a.set(m, m, p, 1);
            }
        }
        a
    }

    pub fn channel_count(&self) -> usize {
        self.channels
    }

    pub fn sample_count(&self) -> usize {
        self.samples
    }

    #[inline]
    fn offset(&self, m: usize, n: usize, p: usize) -> usize {
        (m * self.channels + n) * self.samples + p
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, p: usize) -> u8 {
        self.data[self.offset(m, n, p)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, p: usize, value: u8) {
        let o = self.offset(m, n, p);
        self.data[o] = value;
    }

    /// True iff every per-sample slice is a permutation matrix (all row and
    /// column sums equal 1, entries binary).
    pub fn validate(&self) -> bool {
        if self.data.iter().any(|&v| v > 1) {
            return false;
        }
        for p in 0..self.samples {
            for m in 0..self.channels {
                let row: u32 = (0..self.channels).map(|n| self.get(m, n, p) as u32).sum();
                let col: u32 = (0..self.channels).map(|n| self.get(n, m, p) as u32).sum();
                if row != 1 || col != 1 {
                    return false;
                }
            }
        }
        true
    }

    /// Slice-wise permutation-matrix product; represents applying `other`
    /// first, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self, ShuffleError> {
        if self.channels != other.channels || self.samples != other.samples {
            return Err(ShuffleError::DimensionMismatch(format!(
                "compose {}x{} with {}x{}",
                self.channels, self.samples, other.channels, other.samples
            )));
        }
        let mut out = Self::zeros(self.channels, self.samples);
        for p in 0..self.samples {
            for m in 0..self.channels {
                for n in 0..self.channels {
                    let mut acc = 0u8;
                    for l in 0..self.channels {
                        acc |= self.get(m, l, p) & other.get(l, n, p);
                    }
                    out.set(m, n, p, acc);
                }
            }
        }
        Ok(out)
    }

    /// Group inverse: slice-wise transpose.
    pub fn invert(&self) -> Self {
        let mut out = Self::zeros(self.channels, self.samples);
        for p in 0..self.samples {
            for m in 0..self.channels {
                for n in 0..self.channels {
                    out.set(m, n, p, self.get(n, m, p));
                }
            }
        }
        out
    }

    /// Applies the permutation to a frame: `y_m(p) = sum_n Q[m][n][p] x_n(p)`.
    pub fn apply(&self, frame: &MultiChannelFrame) -> Result<MultiChannelFrame, ShuffleError> {
        if frame.channel_count() != self.channels || frame.sample_count() != self.samples {
            return Err(ShuffleError::DimensionMismatch(format!(
                "assignment {}x{} applied to frame {}x{}",
                self.channels,
                self.samples,
                frame.channel_count(),
                frame.sample_count()
            )));
        }
        let mut channels = vec![vec![0.0; self.samples]; self.channels];
        for p in 0..self.samples {
            for m in 0..self.channels {
                let mut acc = 0.0;
                for n in 0..self.channels {
                    if self.get(m, n, p) == 1 {
                        acc += frame.channel(n)[p];
                    }
                }
                channels[m][p] = acc;
            }
        }
        Ok(MultiChannelFrame::new(
            channels,
            frame.model,
            frame.truth.clone(),
        )?)
    }

    /// Random assignment with exactly `shuffled_count` non-identity slices:
    /// the slice subset is uniform, and each selected slice carries a
    /// uniformly random non-identity permutation.
    pub fn random(
        channels: usize,
        samples: usize,
        shuffled_count: usize,
        seed: u64,
    ) -> Result<Self, ShuffleError> {
        if channels < 2 {
            return Err(ShuffleError::TooFewChannels(channels));
        }
        if shuffled_count > samples {
            return Err(ShuffleError::CountOutOfRange {
                count: shuffled_count,
                n: samples,
            });
        }
        let mut rng = numeric::rng_stream(seed, &[0x7368_7566]);
        let selected = rand::seq::index::sample(&mut rng, samples, shuffled_count);
        let mut out = Self::identity(channels, samples);
        let mut perm: Vec<usize> = (0..channels).collect();
        for p in selected.iter() {
            loop {
                perm.shuffle(&mut rng);
                if perm.iter().enumerate().any(|(i, &v)| i != v) {
                    break;
                }
            }
            for m in 0..channels {
                for n in 0..channels {
                    out.set(m, n, p, u8::from(perm[m] == n));
                }
            }
        }
        Ok(out)
    }

    /// Number of samples whose slice is not the identity permutation.
    pub fn non_identity_slices(&self) -> usize {
        (0..self.samples)
            .filter(|&p| (0..self.channels).any(|m| self.get(m, m, p) != 1))
            .count()
    }

    /// Dense `MN x MN` block matrix; row block `m`, column block `n` holds
    /// `diag(q_mn)`. Test-oracle support.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let size = self.channels * self.samples;
        let mut dense = DMatrix::<f64>::zeros(size, size);
        for m in 0..self.channels {
            for n in 0..self.channels {
                for p in 0..self.samples {
                    if self.get(m, n, p) == 1 {
                        dense[(m * self.samples + p, n * self.samples + p)] = 1.0;
                    }
                }
            }
        }
        dense
    }
}

/// Two-channel assignment as a binary vector: `q(p) = 1` keeps sample `p` in
/// place, `q(p) = 0` swaps it between the channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoChannelMask {
    q: Vec<u8>,
}

impl TwoChannelMask {
    pub fn new(q: Vec<u8>) -> Result<Self, ShuffleError> {
        if q.iter().any(|&v| v > 1) {
            return Err(ShuffleError::NonBinaryEntry);
        }
        Ok(Self { q })
    }

    pub fn ones(n: usize) -> Self {
        Self { q: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q(&self) -> &[u8] {
        &self.q
    }

    pub fn ones_count(&self) -> usize {
        self.q.iter().filter(|&&v| v == 1).count()
    }

    pub fn shuffled_count(&self) -> usize {
        self.len() - self.ones_count()
    }

    pub fn complement(&self) -> Self {
        Self {
            q: self.q.iter().map(|&v| 1 - v).collect(),
        }
    }

    /// Applies the (self-inverse) two-channel permutation to a sample pair.
    pub fn apply_pair(&self, a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut out_a = Vec::with_capacity(a.len());
        let mut out_b = Vec::with_capacity(b.len());
        for (p, &keep) in self.q.iter().enumerate() {
            if keep == 1 {
                out_a.push(a[p]);
                out_b.push(b[p]);
            } else {
                out_a.push(b[p]);
                out_b.push(a[p]);
            }
        }
        (out_a, out_b)
    }

    pub fn to_assignment(&self) -> ShuffleAssignment {
        let n = self.q.len();
        let mut a = ShuffleAssignment::zeros(2, n);
        for (p, &keep) in self.q.iter().enumerate() {
            if keep == 1 {
                a.set(0, 0, p, 1);
                a.set(1, 1, p, 1);
            } else {
                a.set(0, 1, p, 1);
                a.set(1, 0, p, 1);
            }
        }
        a
    }

    pub fn from_assignment(a: &ShuffleAssignment) -> Result<Self, ShuffleError> {
        if a.channel_count() != 2 {
            return Err(ShuffleError::DimensionMismatch(format!(
                "two-channel mask from {} channels",
                a.channel_count()
            )));
        }
        let q = (0..a.sample_count()).map(|p| a.get(0, 0, p)).collect();
        Self::new(q)
    }

    /// Serialization used in CSV output: one character per sample.
    pub fn to_bit_string(&self) -> String {
        self.q.iter().map(|&v| if v == 1 { '1' } else { '0' }).collect()
    }

    pub fn random(n: usize, shuffled_count: usize, seed: u64) -> Result<Self, ShuffleError> {
        let a = ShuffleAssignment::random(2, n, shuffled_count, seed)?;
        Self::from_assignment(&a)
    }
}

/// Uniform random sample subset helper shared by generators.
pub fn random_subset<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, count).into_vec()
}
