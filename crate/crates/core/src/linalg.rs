//! Dense Hermitian helpers shared by the weight solver and the filter designer.

use nalgebra::linalg::{Cholesky, QR};

use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Relative diagonal threshold below which a triangular factor is declared singular.
const RANK_TOLERANCE: f64 = 1e-12;

/// Frobenius-relative Hermitian asymmetry `||M - M^H|| / ||M||`.
pub(crate) fn hermitian_asymmetry(m: &CMatrix) -> f64 {
    let scale = m.norm();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / scale
}

pub(crate) fn ensure_hermitian(m: &CMatrix, tolerance: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = hermitian_asymmetry(m);
    if asym > tolerance {
        return Err(Error::NotHermitian(asym));
    }
    Ok(())
}

pub(crate) fn cholesky(m: &CMatrix) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
    // Complex square roots never fail, so check the pivots explicitly.
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d.re > 0.0) || !d.re.is_finite() || d.im.abs() > 1e-12 * d.re {
            return Err(Error::NotPositiveDefinite);
        }
    }
    Ok(chol)
}

/// Real part of a Hermitian quadratic form, rejecting imaginary residue above
/// `tolerance * scale`. `scale` bounds the rounding error of the form.
pub(crate) fn real_part_checked(value: Complex64, scale: f64, tolerance: f64) -> Result<f64> {
    let scale = scale.max(value.re.abs());
    if value.im.abs() > tolerance * scale + f64::MIN_POSITIVE {
        return Err(Error::ImaginaryResidue(
            value.im.abs() / scale.max(f64::MIN_POSITIVE),
        ));
    }
    Ok(value.re)
}

/// `v^H M v` for Hermitian `M`, checked against the rounding scale `||M|| ||v||^2`.
pub(crate) fn hermitian_form(m: &CMatrix, v: &CVector, tolerance: f64) -> Result<f64> {
    real_part_checked(v.dotc(&(m * v)), m.norm() * v.norm_squared(), tolerance)
}

/// Whitened and equilibrated factorisation of an LCMV problem.
///
/// With `R = L L^H`, column scales `S` and `L^-1 F S = Q T`:
///
/// - `h = L^-H Q T^-H S d`
/// - `(F^H R^-1 F)^-1 = S T^-1 T^-H S`
pub(crate) struct WhitenedConstraints {
    chol: Cholesky<Complex64, nalgebra::Dyn>,
    q: CMatrix,
    t: CMatrix,
    scales: Vec<f64>,
    f: CMatrix,
}

impl WhitenedConstraints {
    pub(crate) fn new(r: &CMatrix, f: &CMatrix) -> Result<Self> {
        if r.nrows() != f.nrows() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{} but constraint matrix has {} rows",
                r.nrows(),
                r.ncols(),
                f.nrows()
            )));
        }
        let k = f.ncols();
        if k == 0 || k > f.nrows() {
            return Err(Error::RankDeficient {
                rank: k.min(f.nrows()),
                constraints: k,
            });
        }
        let chol = cholesky(r)?;
        let mut scaled = f.clone();
        let mut scales = Vec::with_capacity(k);
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            let n = col.norm();
            if n == 0.0 {
                return Err(Error::RankDeficient {
                    rank: j,
                    constraints: k,
                });
            }
            col /= Complex64::new(n, 0.0);
            scales.push(1.0 / n);
        }
        let l = chol.l_dirty();
        if !l.solve_lower_triangular_mut(&mut scaled) {
            return Err(Error::NotPositiveDefinite);
        }
        let qr = QR::new(scaled);
        let t = qr.r();
        let q = qr.q();
        let diag_max = (0..k).map(|i| t[(i, i)].norm()).fold(0.0, f64::max);
        let rank = (0..k)
            .filter(|&i| t[(i, i)].norm() > RANK_TOLERANCE * diag_max)
            .count();
        if rank < k || diag_max == 0.0 {
            return Err(Error::RankDeficient {
                rank,
                constraints: k,
            });
        }
        Ok(Self {
            chol,
            q,
            t,
            scales,
            f: f.clone(),
        })
    }

    fn scaled_targets(&self, d: &CVector) -> CVector {
        CVector::from_iterator(d.len(), d.iter().zip(&self.scales).map(|(v, s)| v * *s))
    }

    /// Weights with two steps of iterative refinement on the constraint residual.
    pub(crate) fn weights(&self, d: &CVector) -> Result<CVector> {
        if d.len() != self.scales.len() {
            return Err(Error::Dimension(format!(
                "{} targets for {} constraints",
                d.len(),
                self.scales.len()
            )));
        }
        let mut h = self.raw_weights(d)?;
        for _ in 0..2 {
            let residual = d - self.f.ad_mul(&h);
            h += self.raw_weights(&residual)?;
        }
        Ok(h)
    }

    fn raw_weights(&self, d: &CVector) -> Result<CVector> {
        let u = self
            .t
            .ad_solve_upper_triangular(&self.scaled_targets(d))
            .ok_or(Error::RankDeficient {
                rank: 0,
                constraints: d.len(),
            })?;
        let w = &self.q * u;
        self.chol
            .l_dirty()
            .ad_solve_lower_triangular(&w)
            .ok_or(Error::NotPositiveDefinite)
    }

    /// `(F^H R^-1 F)^-1`, Hermitian by construction.
    pub(crate) fn dual_gram(&self) -> Result<CMatrix> {
        let k = self.scales.len();
        let t_inv = self
            .t
            .solve_upper_triangular(&CMatrix::identity(k, k))
            .ok_or(Error::RankDeficient {
                rank: 0,
                constraints: k,
            })?;
        let inner = &t_inv * t_inv.adjoint();
        let mut a = CMatrix::from_fn(k, k, |i, j| {
            inner[(i, j)] * (self.scales[i] * self.scales[j])
        });
        symmetrize(&mut a);
        Ok(a)
    }
}

/// Replace `m` by `(m + m^H) / 2`.
pub(crate) fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Minimum-norm `h` with `F^H h = d` (identity covariance).
#[cfg(test)]
pub(crate) fn min_norm_solution(sys: &crate::constraints::ConstraintSystem) -> Result<CVector> {
    let n = sys.matrix.nrows();
    WhitenedConstraints::new(&CMatrix::identity(n, n), &sys.matrix)?.weights(&sys.targets)
}
