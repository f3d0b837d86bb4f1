//! Group-delay optimisation for derivative-constrained LCMV designs.
//!
//! With `d(q) = [(-iq)^k]` on the dc block and zeros on the Nyquist block, the
//! minimum noise power `P(q) = d(q)^H A d(q)` is a real polynomial in `q` of
//! degree `2 (K_dc - 1)`. Its stationary points are the roots of `P'(q)`. A root
//! is feasible when it is numerically real and strictly positive; when none is,
//! the linear-phase delay `(M_t - 1) / 2` is used instead.

use crate::lcmv::DualGram;
use crate::linalg::ensure_hermitian;
use crate::poly;
use crate::{Complex64, Error, Result};

/// Imaginary residue tolerated on polynomial coefficients, relative to the largest.
const COEFFICIENT_IMAG_TOLERANCE: f64 = 1e-9;
/// A root `z` counts as real when `|Im z| <= ROOT_IMAG_TOLERANCE * max(1, |Re z|)`.
pub const ROOT_IMAG_TOLERANCE: f64 = 1e-6;

/// `P(q)` in ascending powers of `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPolynomial {
    coeffs: Vec<f64>,
}

impl PowerPolynomial {
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::ZeroPolynomial);
        }
        Ok(Self { coeffs })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, q: f64) -> f64 {
        poly::eval(&self.coeffs, q)
    }

    pub fn derivative(&self) -> Vec<f64> {
        poly::derivative(&self.coeffs)
    }
}

/// Outcome of a delay-selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySelection {
    pub group_delay: f64,
    /// Real parts of the feasible roots of `P'(q)`, ascending.
    pub feasible_roots: Vec<f64>,
    /// The chosen delay is the `(M_t - 1) / 2` fallback rather than a root.
    pub used_fallback: bool,
    /// `P` at the chosen delay.
    pub power: f64,
}

/// Expand `d(q)^H A d(q)` into real polynomial coefficients.
///
/// The coefficient of `q^m` is `sum_{j+k=m} i^j (-i)^k A[j, k]` over the dc block.
pub fn power_polynomial(
    a: &DualGram,
    dc_order: usize,
    nyquist_order: usize,
) -> Result<PowerPolynomial> {
    if dc_order == 0 {
        return Err(Error::InvalidParameter(
            "dc order must be at least 1".into(),
        ));
    }
    if a.size() != dc_order + nyquist_order {
        return Err(Error::Dimension(format!(
            "dual Gram is {}x{}, constraints need {}",
            a.size(),
            a.size(),
            dc_order + nyquist_order
        )));
    }
    let m = a.matrix();
    ensure_hermitian(m, 1e-9)?;
    let i_pow = |p: usize| -> Complex64 {
        [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ][p % 4]
    };
    let mut raw = vec![Complex64::new(0.0, 0.0); 2 * dc_order - 1];
    for j in 0..dc_order {
        for k in 0..dc_order {
            // (-i)^k = i^(3k)
            raw[j + k] += i_pow(j) * i_pow(3 * k) * m[(j, k)];
        }
    }
    let scale = raw.iter().fold(0.0f64, |s, c| s.max(c.norm()));
    let residue = raw.iter().fold(0.0f64, |s, c| s.max(c.im.abs()));
    if residue > COEFFICIENT_IMAG_TOLERANCE * scale {
        return Err(Error::ImaginaryResidue(residue / scale));
    }
    PowerPolynomial::from_coefficients(raw.into_iter().map(|c| c.re).collect())
}

/// Fallback delay `(M_t - 1) / 2`.
pub fn fallback_delay(taps: usize) -> f64 {
    (taps as f64 - 1.0) / 2.0
}

/// Real, strictly positive roots of `P'(q)`, ascending.
pub fn feasible_roots(poly: &PowerPolynomial) -> Result<Vec<f64>> {
    let dp = poly.derivative();
    if dp.is_empty() || dp.iter().all(|c| *c == 0.0) {
        return Ok(Vec::new());
    }
    let trimmed = poly::trim(&dp)?;
    if trimmed.len() == 1 {
        return Ok(Vec::new());
    }
    let mut roots: Vec<f64> = poly::polynomial_roots(trimmed)?
        .into_iter()
        .filter(|z| z.im.abs() <= ROOT_IMAG_TOLERANCE * z.re.abs().max(1.0) && z.re > 0.0)
        .map(|z| z.re)
        .collect();
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// Minimum-power rule: the lowest `P` among the feasible roots and the fallback.
pub fn minimize_power_delay(poly: &PowerPolynomial, taps: usize) -> Result<DelaySelection> {
    let roots = feasible_roots(poly)?;
    let fallback = fallback_delay(taps);
    let mut best = (fallback, poly.eval(fallback), true);
    for &q in &roots {
        let p = poly.eval(q);
        if p < best.1 {
            best = (q, p, false);
        }
    }
    Ok(DelaySelection {
        group_delay: best.0,
        feasible_roots: roots,
        used_fallback: best.2,
        power: best.1,
    })
}

/// Minimum-latency rule: the smallest feasible root, else the fallback.
pub fn minimize_latency_delay(poly: &PowerPolynomial, taps: usize) -> Result<DelaySelection> {
    let roots = feasible_roots(poly)?;
    let (q, used_fallback) = match roots.first() {
        Some(&q) => (q, false),
        None => (fallback_delay(taps), true),
    };
    Ok(DelaySelection {
        group_delay: q,
        power: poly.eval(q),
        feasible_roots: roots,
        used_fallback,
    })
}
