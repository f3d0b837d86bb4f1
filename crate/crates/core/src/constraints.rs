//! Linear constraint systems `F^H h = d` for derivative- and point-constrained designs.
//!
//! Derivative constraints fix the first `K_dc` frequency derivatives of the
//! look-direction response at dc to `(-i q)^k`, which is the response of a pure
//! delay of `q` samples, and force the first `K_pi` derivatives at Nyquist to zero.

use std::f64::consts::PI;

use crate::steering::{basis_vector, FilterGrid, WeightVector};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Derivative constraints at dc and Nyquist for a given group delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeConstraintSpec {
    pub dc_order: usize,
    pub nyquist_order: usize,
    /// Look direction in radians.
    pub look_direction: f64,
    /// Low-frequency group delay in samples.
    pub group_delay: f64,
}

impl DerivativeConstraintSpec {
    pub fn new(
        dc_order: usize,
        nyquist_order: usize,
        look_direction: f64,
        group_delay: f64,
    ) -> Result<Self> {
        if dc_order == 0 {
            return Err(Error::InvalidParameter(
                "at least one dc constraint (unity gain) is required".into(),
            ));
        }
        if !group_delay.is_finite() || !look_direction.is_finite() {
            return Err(Error::InvalidParameter(
                "group delay and look direction must be finite".into(),
            ));
        }
        Ok(Self {
            dc_order,
            nyquist_order,
            look_direction,
            group_delay,
        })
    }

    pub fn total(&self) -> usize {
        self.dc_order + self.nyquist_order
    }

    pub fn with_group_delay(mut self, group_delay: f64) -> Self {
        self.group_delay = group_delay;
        self
    }

    fn check_grid(&self, grid: FilterGrid) -> Result<()> {
        if self.total() > grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} constraints exceed {} degrees of freedom",
                self.total(),
                grid.len()
            )));
        }
        Ok(())
    }
}

/// Complex response targets at discrete frequencies in the look direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConstraintSpec {
    pub look_direction: f64,
    /// `(omega, target)` pairs, omega in radians/sample.
    pub points: Vec<(f64, Complex64)>,
}

impl PointConstraintSpec {
    /// Linear-phase unity-gain targets `exp(-i q w_k)` on the bins `2 pi k / dft_len`.
    pub fn linear_phase_bins(
        look_direction: f64,
        dft_len: usize,
        bins: &[i64],
        group_delay: f64,
    ) -> Self {
        let points = bins
            .iter()
            .map(|&k| {
                let w = 2.0 * PI * k as f64 / dft_len as f64;
                (w, Complex64::cis(-group_delay * w))
            })
            .collect();
        Self {
            look_direction,
            points,
        }
    }
}

/// The pair `(F, d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    pub matrix: CMatrix,
    pub targets: CVector,
}

impl ConstraintSystem {
    pub fn new(matrix: CMatrix, targets: CVector) -> Result<Self> {
        if matrix.ncols() != targets.len() {
            return Err(Error::Dimension(format!(
                "constraint matrix has {} columns but {} targets",
                matrix.ncols(),
                targets.len()
            )));
        }
        Ok(Self { matrix, targets })
    }

    pub fn count(&self) -> usize {
        self.targets.len()
    }

    /// `||F^H h - d||`.
    pub fn residual(&self, h: &WeightVector) -> f64 {
        (self.matrix.ad_mul(h.as_vector()) - &self.targets).norm()
    }

    /// Residual scaled as `||F^H h - d|| / (1 + ||d||)`.
    pub fn relative_residual(&self, h: &WeightVector) -> f64 {
        self.residual(h) / (1.0 + self.targets.norm())
    }

    /// Append further constraints (columns of `F`, entries of `d`).
    pub fn stacked_with(&self, other: &ConstraintSystem) -> Result<ConstraintSystem> {
        if self.matrix.nrows() != other.matrix.nrows() {
            return Err(Error::Dimension(
                "constraint systems have different row counts".into(),
            ));
        }
        let rows = self.matrix.nrows();
        let k = self.count() + other.count();
        let mut matrix = CMatrix::zeros(rows, k);
        matrix.columns_mut(0, self.count()).copy_from(&self.matrix);
        matrix
            .columns_mut(self.count(), other.count())
            .copy_from(&other.matrix);
        let targets =
            CVector::from_iterator(k, self.targets.iter().chain(other.targets.iter()).copied());
        Ok(ConstraintSystem { matrix, targets })
    }
}

/// `d = [(-i q)^0 .. (-i q)^(K_dc-1), 0 .. 0]`.
pub fn build_d(spec: &DerivativeConstraintSpec) -> CVector {
    let base = Complex64::new(0.0, -spec.group_delay);
    let mut d = CVector::zeros(spec.total());
    let mut power = Complex64::new(1.0, 0.0);
    for k in 0..spec.dc_order {
        d[k] = power;
        power *= base;
    }
    d
}

/// `d^k f(m_t, m_s) / dw^k` at dc, or at Nyquist when `at_nyquist`.
pub fn derivative_basis_element(
    m_t: usize,
    m_s: usize,
    k: usize,
    look_direction: f64,
    omega_s: f64,
    at_nyquist: bool,
) -> Complex64 {
    let mut value = Complex64::new(0.0, m_t as f64).powu(k as u32)
        * Complex64::cis(-(m_s as f64) * omega_s * look_direction.sin());
    if at_nyquist && m_t % 2 == 1 {
        value = -value;
    }
    value
}

/// `F = [F_dc F_pi]` with rows in weight-stacking order.
pub fn build_f_derivative(
    spec: &DerivativeConstraintSpec,
    grid: FilterGrid,
    omega_s: f64,
) -> CMatrix {
    CMatrix::from_fn(grid.len(), spec.total(), |row, col| {
        let (m_s, m_t) = (row / grid.taps, row % grid.taps);
        if col < spec.dc_order {
            derivative_basis_element(m_t, m_s, col, spec.look_direction, omega_s, false)
        } else {
            derivative_basis_element(
                m_t,
                m_s,
                col - spec.dc_order,
                spec.look_direction,
                omega_s,
                true,
            )
        }
    })
}

/// Full derivative-constrained system for the given grid.
pub fn derivative_system(
    spec: &DerivativeConstraintSpec,
    grid: FilterGrid,
    omega_s: f64,
) -> Result<ConstraintSystem> {
    spec.check_grid(grid)?;
    ConstraintSystem::new(build_f_derivative(spec, grid, omega_s), build_d(spec))
}

/// Point constraints: column `j` is `f(w_j, theta_l)` and `d_j` its target.
pub fn build_f_point(
    spec: &PointConstraintSpec,
    grid: FilterGrid,
    omega_s: f64,
) -> Result<ConstraintSystem> {
    if spec.points.is_empty() {
        return Err(Error::InvalidParameter(
            "point constraint list is empty".into(),
        ));
    }
    if spec.points.len() > grid.len() {
        return Err(Error::InvalidParameter(format!(
            "{} point constraints exceed {} degrees of freedom",
            spec.points.len(),
            grid.len()
        )));
    }
    for (i, (wi, _)) in spec.points.iter().enumerate() {
        for (wj, _) in &spec.points[..i] {
            if (wi - wj).abs() <= 1e-12 * (1.0 + wi.abs()) {
                return Err(Error::DuplicateFrequency(*wi));
            }
        }
    }
    let mut matrix = CMatrix::zeros(grid.len(), spec.points.len());
    for (j, (w, _)) in spec.points.iter().enumerate() {
        matrix.set_column(j, &basis_vector(*w, spec.look_direction, grid, omega_s));
    }
    let targets = CVector::from_iterator(spec.points.len(), spec.points.iter().map(|p| p.1));
    ConstraintSystem::new(matrix, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::steering::response;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn d_vector_examples() {
        let spec = DerivativeConstraintSpec::new(5, 2, 0.1, 4.0).unwrap();
        let d = build_d(&spec);
        let expected = [
            c(1.0, 0.0),
            c(0.0, -4.0),
            c(-16.0, 0.0),
            c(0.0, 64.0),
            c(256.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
        ];
        for (a, b) in d.iter().zip(expected.iter()) {
            assert!((a - b).norm() < 1e-12);
        }

        let d = build_d(&DerivativeConstraintSpec::new(3, 4, 0.0, 0.0).unwrap());
        assert_eq!(d[0], c(1.0, 0.0));
        assert!(d.iter().skip(1).all(|z| z.norm() == 0.0));

        let d = build_d(&DerivativeConstraintSpec::new(1, 0, 0.0, 2.5).unwrap());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0], c(1.0, 0.0));
    }

    #[test]
    fn dc_order_zero_rejected() {
        assert!(DerivativeConstraintSpec::new(0, 2, 0.0, 1.0).is_err());
        assert!(DerivativeConstraintSpec::new(1, 0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn too_many_constraints_rejected() {
        let spec = DerivativeConstraintSpec::new(3, 2, 0.0, 1.0).unwrap();
        let grid = FilterGrid::new(2, 2).unwrap();
        assert!(derivative_system(&spec, grid, 1.0).is_err());
    }

    #[test]
    fn d_magnitudes_are_delay_powers() {
        let spec = DerivativeConstraintSpec::new(6, 1, 0.0, 2.7).unwrap();
        let d = build_d(&spec);
        for k in 0..6 {
            assert!((d[k].norm() - 2.7f64.powi(k as i32)).abs() < 1e-10 * 2.7f64.powi(k as i32));
        }
    }

    #[test]
    fn basis_element_examples() {
        assert_eq!(
            derivative_basis_element(0, 0, 0, 0.4, 2.0, false),
            c(1.0, 0.0)
        );
        assert!((derivative_basis_element(2, 0, 1, 0.4, 2.0, false) - c(0.0, 2.0)).norm() < 1e-15);
        assert!((derivative_basis_element(1, 0, 0, 0.4, 2.0, true) - c(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_element_single_tap() {
        let spec = DerivativeConstraintSpec::new(1, 0, 0.77, 0.0).unwrap();
        let f = build_f_derivative(&spec, FilterGrid::new(1, 1).unwrap(), 3.0);
        assert_eq!(f.shape(), (1, 1));
        assert!((f[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dc_column_zero_is_spatial_steering() {
        let grid = FilterGrid::new(4, 3).unwrap();
        let theta = 0.35;
        let ws = 2.1;
        let spec = DerivativeConstraintSpec::new(2, 1, theta, 1.5).unwrap();
        let f = build_f_derivative(&spec, grid, ws);
        let basis = basis_vector(0.0, theta, grid, ws);
        for row in 0..grid.len() {
            let m_s = row / grid.taps;
            let expected = Complex64::cis(-(m_s as f64) * ws * theta.sin());
            assert!((f[(row, 0)] - expected).norm() < 1e-14);
            assert!((f[(row, 0)] - basis[row]).norm() < 1e-14);
        }
    }

    #[test]
    fn dc_entries_have_power_modulus() {
        let grid = FilterGrid::new(5, 3).unwrap();
        let spec = DerivativeConstraintSpec::new(4, 2, -0.6, 2.0).unwrap();
        let f = build_f_derivative(&spec, grid, 2.5);
        for row in 0..grid.len() {
            let m_t = (row % grid.taps) as f64;
            for k in 0..4 {
                let expected = if k == 0 { 1.0 } else { m_t.powi(k as i32) };
                assert!((f[(row, k)].norm() - expected).abs() < 1e-12 * (1.0 + expected));
            }
        }
    }

    /// Finite-difference oracle: differentiate f(w) numerically at w = 0 and w = pi.
    #[test]
    fn columns_match_finite_differences() {
        let grid = FilterGrid::new(4, 2).unwrap();
        let theta = 0.4;
        let ws = 2.2;
        let spec = DerivativeConstraintSpec::new(4, 4, theta, 0.0).unwrap();
        let f = build_f_derivative(&spec, grid, ws);
        let fv = |w: f64| basis_vector(w, theta, grid, ws);
        let h = 1e-2;
        let r = |v: f64| Complex64::new(v, 0.0);
        for (offset, base) in [(0usize, 0.0), (4, PI)] {
            let p = |j: f64| fv(base + j * h);
            let approx: [CVector; 4] = [
                p(0.0),
                (-p(2.0) + p(1.0) * r(8.0) - p(-1.0) * r(8.0) + p(-2.0)) * r(1.0 / (12.0 * h)),
                (-p(2.0) + p(1.0) * r(16.0) - p(0.0) * r(30.0) + p(-1.0) * r(16.0) - p(-2.0))
                    * r(1.0 / (12.0 * h * h)),
                (-p(3.0) + p(2.0) * r(8.0) - p(1.0) * r(13.0) + p(-1.0) * r(13.0)
                    - p(-2.0) * r(8.0)
                    + p(-3.0))
                    * r(1.0 / (8.0 * h * h * h)),
            ];
            for (k, col) in approx.iter().enumerate() {
                let exact = f.column(offset + k);
                let err = (col - exact).norm();
                assert!(
                    err <= 1e-6 * exact.norm().max(1.0),
                    "k={k} base={base} err={err}"
                );
            }
        }
    }

    #[test]
    fn single_point_equals_unit_dc_constraint() {
        let grid = FilterGrid::new(9, 8).unwrap();
        let theta = -0.5;
        let ws = PI;
        let point = build_f_point(
            &PointConstraintSpec {
                look_direction: theta,
                points: vec![(0.0, c(1.0, 0.0))],
            },
            grid,
            ws,
        )
        .unwrap();
        let deriv = derivative_system(
            &DerivativeConstraintSpec::new(1, 0, theta, 3.0).unwrap(),
            grid,
            ws,
        )
        .unwrap();
        assert!((&point.matrix - &deriv.matrix).norm() < 1e-14);
        assert_eq!(point.targets, deriv.targets);
    }

    #[test]
    fn point_bins_for_variant_c() {
        let grid = FilterGrid::new(9, 8).unwrap();
        let spec = PointConstraintSpec::linear_phase_bins(0.2, 9, &[-2, -1, 0, 1, 2], 4.0);
        let sys = build_f_point(&spec, grid, PI).unwrap();
        assert_eq!(sys.matrix.shape(), (72, 5));
        for (j, k) in (-2i64..=2).enumerate() {
            let w = 2.0 * PI * k as f64 / 9.0;
            assert!((sys.targets[j] - Complex64::cis(-4.0 * w)).norm() < 1e-15);
        }
        // A weight vector satisfying F^H h = d has the target response at each bin.
        let h = crate::linalg::min_norm_solution(&sys).unwrap();
        let h = WeightVector::from_stacked(grid, h).unwrap();
        for (w, target) in &spec.points {
            assert!((response(&h, *w, 0.2, PI) - target).norm() < 1e-10);
        }
    }

    #[test]
    fn duplicate_frequencies_rejected() {
        let spec = PointConstraintSpec {
            look_direction: 0.0,
            points: vec![(0.5, c(1.0, 0.0)), (0.5, c(0.0, 1.0))],
        };
        assert!(matches!(
            build_f_point(&spec, FilterGrid::new(4, 2).unwrap(), 1.0),
            Err(Error::DuplicateFrequency(_))
        ));
    }

    #[test]
    fn stacking_systems() {
        let grid = FilterGrid::new(4, 1).unwrap();
        let a = derivative_system(
            &DerivativeConstraintSpec::new(2, 0, 0.0, 1.0).unwrap(),
            grid,
            0.0,
        )
        .unwrap();
        let b = build_f_point(
            &PointConstraintSpec {
                look_direction: 0.0,
                points: vec![(PI, c(0.0, 0.0))],
            },
            grid,
            0.0,
        )
        .unwrap();
        let s = a.stacked_with(&b).unwrap();
        assert_eq!(s.count(), 3);
        assert_eq!(s.matrix.column(2), b.matrix.column(0));
    }
}
