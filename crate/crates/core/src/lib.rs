//! Phase-optimised linearly-constrained minimum-variance (LCMV) beamforming.
//!
//! The crate covers the full design chain for a spatiotemporal (tapped
//! delay-line) beamformer on a uniform linear array:
//!
//! - [`steering`]: array geometry, basis vectors and the angle-frequency response.
//! - [`constraints`]: derivative (dc/Nyquist) and point constraint systems `(F, d)`.
//! - [`lcmv`]: covariance estimation, the closed-form weight solution and both
//!   noise-power forms.
//! - [`delay`]: the noise power as a polynomial in the group delay, and the
//!   minimum-power / minimum-latency delay selection rules.
//! - [`filters`]: stopband-power-minimising FIR prototypes (pulse shaping,
//!   noise shaping, receiver and fractional-delay filters).
//! - [`scenario`]: random VHF communication and UHF bistatic radar scenarios and
//!   the per-element receiver chain.
//! - [`beamformer`]: the six beamformer variants A..F and application of weights.
//! - [`evaluation`]: communication SNR scoring and range-Doppler processing.
//! - [`experiment`]: seeded Monte-Carlo campaigns and CSV exports.

pub mod beamformer;
pub mod constraints;
pub mod delay;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod filters;
pub mod io;
pub mod lcmv;
mod linalg;
pub mod poly;
pub mod scenario;
pub mod signal;
pub mod steering;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
/// Dense complex column vector used throughout the crate.
pub type CVector = nalgebra::DVector<Complex64>;
