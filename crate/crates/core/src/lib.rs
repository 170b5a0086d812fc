//! Recovery of multi-channel sparse signals whose samples have been shuffled
//! across channels.
//!
//! The crate is organized around the two-step recovery pipeline and the
//! supporting theory:
//!
//! - [`signal`]: periodic Dirac / decaying-exponential stream synthesis,
//!   sensing matrices, calibrated noise.
//! - [`shuffle`]: cross-channel permutation tensors and two-channel masks.
//! - [`spectral`]: Toeplitz embedding, Cadzow denoising, annihilating-filter
//!   support recovery, decay compensation.
//! - [`robust`]: MM-regression (S-scale + IRWLS) with an optional
//!   nonnegativity constraint.
//! - [`sssr`]: the alternating assignment/regression recovery loop.
//! - [`baselines`]: HardEM and oracle reference estimators.
//! - [`theory`]: genericity and uniqueness checks at enumerable sizes.

pub mod baselines;
pub mod numeric;
pub mod robust;
pub mod shuffle;
pub mod signal;
pub mod spectral;
pub mod sssr;
pub mod theory;

pub use num_complex::Complex64;
