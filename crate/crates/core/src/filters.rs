//! One-dimensional FIR prototypes designed by constrained stopband-power minimisation.
//!
//! Taps minimise `h^H (Q + eps I) h`, where `Q` is the stopband Gram matrix for
//! `w_b <= |w| <= pi`, subject to `K_dc` dc-derivative and `K_pi`
//! Nyquist-derivative constraints. The dc targets `(-i q)^k` realise a flat
//! low-frequency group delay of `q` samples. The same closed-form LCMV solver
//! used for the beamformers does the work, with a single element.

use std::f64::consts::PI;

use crate::constraints::{derivative_system, DerivativeConstraintSpec};
use crate::lcmv::{solve_weights, CovarianceMatrix};
use crate::signal;
use crate::steering::FilterGrid;
use crate::{CMatrix, Complex64, Error, Result};

/// Relative regularisation added to the stopband Gram before solving.
pub const GRAM_REGULARISATION: f64 = 1e-9;
/// Grid size used when scanning for the first spectral null.
pub const NULL_SCAN_POINTS: usize = 4096;
/// A local minimum counts as a null when this far below the dc gain.
pub const NULL_DEPTH_DB: f64 = -60.0;

/// How a filter was designed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterDesign {
    pub length: usize,
    pub dc_order: usize,
    pub nyquist_order: usize,
    pub stopband_edge: f64,
    pub group_delay: f64,
}

/// FIR taps, `y[n] = sum_m taps[m] x[n - m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<Complex64>,
    design: Option<FilterDesign>,
}

impl FirFilter {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter(
                "filter needs at least one tap".into(),
            ));
        }
        Ok(Self { taps, design: None })
    }

    pub fn from_real(taps: &[f64]) -> Result<Self> {
        Self::new(taps.iter().map(|t| Complex64::new(*t, 0.0)).collect())
    }

    pub fn impulse() -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            design: None,
        }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn design(&self) -> Option<&FilterDesign> {
        self.design.as_ref()
    }

    /// `H(w) = sum_m h[m] exp(-i w m)`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z = Complex64::cis(-omega);
        self.taps
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, t| acc * z + t)
    }

    /// `sum |h|^2`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// `h^H Q h` for the stopband `[w_b, pi]`.
    pub fn stopband_power(&self, stopband_edge: f64) -> f64 {
        let q = stopband_gram(self.len(), stopband_edge);
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, a) in self.taps.iter().enumerate() {
            for (n, b) in self.taps.iter().enumerate() {
                acc += a.conj() * b * q[(m, n)];
            }
        }
        acc.re
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        signal::fir_filter(x, &self.taps)
    }
}

/// Stopband design request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapingDesignSpec {
    pub length: usize,
    pub dc_order: usize,
    pub nyquist_order: usize,
    /// Stopband edge `w_b` in radians/sample.
    pub stopband_edge: f64,
    /// dc group delay; `(M - 1) / 2` when `None`.
    pub group_delay: Option<f64>,
}

impl ShapingDesignSpec {
    pub fn new(length: usize, dc_order: usize, nyquist_order: usize, stopband_edge: f64) -> Self {
        Self {
            length,
            dc_order,
            nyquist_order,
            stopband_edge,
            group_delay: None,
        }
    }

    pub fn with_group_delay(mut self, q: f64) -> Self {
        self.group_delay = Some(q);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidParameter(
                "filter length must be at least 1".into(),
            ));
        }
        if self.dc_order + self.nyquist_order > self.length {
            return Err(Error::InvalidParameter(format!(
                "{} constraints exceed filter length {}",
                self.dc_order + self.nyquist_order,
                self.length
            )));
        }
        if !(0.0..=PI).contains(&self.stopband_edge) {
            return Err(Error::InvalidParameter(format!(
                "stopband edge {} outside [0, pi]",
                self.stopband_edge
            )));
        }
        Ok(())
    }
}

/// `Q[m, n] = (1/pi) int_{w_b}^{pi} cos((m - n) w) dw`.
pub fn stopband_gram(length: usize, stopband_edge: f64) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(length, length, |m, n| {
        if m == n {
            (PI - stopband_edge) / PI
        } else {
            let k = m as f64 - n as f64;
            -(stopband_edge * k).sin() / (PI * k)
        }
    })
}

pub fn design_shaping_filter(spec: &ShapingDesignSpec) -> Result<FirFilter> {
    spec.validate()?;
    let delay = spec.group_delay.unwrap_or((spec.length as f64 - 1.0) / 2.0);
    let q = stopband_gram(spec.length, spec.stopband_edge);
    let eps = GRAM_REGULARISATION * q.trace().max(1.0);
    let r = CMatrix::from_fn(spec.length, spec.length, |m, n| {
        Complex64::new(q[(m, n)] + if m == n { eps } else { 0.0 }, 0.0)
    });
    let grid = FilterGrid::new(spec.length, 1)?;
    let cov = CovarianceMatrix::new(r, grid)?;
    let constraints = DerivativeConstraintSpec::new(spec.dc_order, spec.nyquist_order, 0.0, delay)?;
    let sys = derivative_system(&constraints, grid, 0.0)?;
    let h = solve_weights(&cov, &sys)?;
    Ok(FirFilter {
        taps: h.as_vector().iter().copied().collect(),
        design: Some(FilterDesign {
            length: spec.length,
            dc_order: spec.dc_order,
            nyquist_order: spec.nyquist_order,
            stopband_edge: spec.stopband_edge,
            group_delay: delay,
        }),
    })
}

/// Low-pass fractional delay of `tau` samples (minimum-norm when under-determined).
pub fn design_fractional_delay(
    length: usize,
    tau: f64,
    dc_order: usize,
    nyquist_order: usize,
) -> Result<FirFilter> {
    if !(0.0..=(length as f64 - 1.0)).contains(&tau) {
        return Err(Error::InvalidParameter(format!(
            "delay {tau} outside [0, {}]",
            length as f64 - 1.0
        )));
    }
    design_shaping_filter(
        &ShapingDesignSpec::new(length, dc_order, nyquist_order, PI).with_group_delay(tau),
    )
}

/// Frequency of the first spectral null, or `pi` when there is none.
pub fn first_null_frequency(f: &FirFilter) -> f64 {
    first_null_frequency_with_grid(f, NULL_SCAN_POINTS)
}

/// [`first_null_frequency`] on a configurable scan grid.
pub fn first_null_frequency_with_grid(f: &FirFilter, points: usize) -> f64 {
    let mag = |w: f64| f.response(w).norm();
    let grid: Vec<f64> = (0..=points)
        .map(|j| PI * j as f64 / points as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|w| mag(*w)).collect();
    let reference = if values[0] > 0.0 {
        values[0]
    } else {
        values.iter().fold(0.0f64, |a, b| a.max(*b))
    };
    if reference == 0.0 {
        return PI;
    }
    let threshold = reference * 10f64.powf(NULL_DEPTH_DB / 20.0);
    for j in 1..points {
        if values[j] <= values[j - 1] && values[j] <= values[j + 1] {
            let (w, v) = golden_minimum(&mag, grid[j - 1], grid[j + 1]);
            if v <= threshold {
                return w;
            }
        }
    }
    PI
}

fn golden_minimum(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let w = 0.5 * (a + b);
    (w, f(w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CVector;

    /// Generic equality-constrained QP oracle: solve the KKT block system directly.
    pub(crate) fn qp_oracle(spec: &ShapingDesignSpec) -> Vec<Complex64> {
        let m = spec.length;
        let delay = spec.group_delay.unwrap_or((m as f64 - 1.0) / 2.0);
        let q = stopband_gram(m, spec.stopband_edge);
        let eps = GRAM_REGULARISATION * q.trace().max(1.0);
        let k = spec.dc_order + spec.nyquist_order;
        let mut kkt = CMatrix::zeros(m + k, m + k);
        let mut rhs = CVector::zeros(m + k);
        for a in 0..m {
            for b in 0..m {
                kkt[(a, b)] = Complex64::new(q[(a, b)] + if a == b { eps } else { 0.0 }, 0.0);
            }
        }
        // Constraint rows: sum_m conj(c_m) h_m = target, each row scaled to unit norm.
        for j in 0..k {
            let (order, nyq) = if j < spec.dc_order {
                (j, false)
            } else {
                (j - spec.dc_order, true)
            };
            let mut row: Vec<Complex64> = (0..m)
                .map(|t| {
                    let mut v = Complex64::new(0.0, t as f64).powu(order as u32);
                    if nyq && t % 2 == 1 {
                        v = -v;
                    }
                    v
                })
                .collect();
            let target = if nyq {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, -delay).powu(order as u32)
            };
            let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            row.iter_mut().for_each(|v| *v /= norm);
            for t in 0..m {
                kkt[(m + j, t)] = row[t].conj();
                kkt[(t, m + j)] = row[t];
            }
            rhs[m + j] = target / norm;
        }
        let sol = kkt.lu().solve(&rhs).expect("KKT system solvable");
        sol.rows(0, m).iter().copied().collect()
    }

    fn dc_and_nyquist_residuals(f: &FirFilter, dc: usize, nyq: usize, delay: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..dc {
            let v: Complex64 = f
                .taps()
                .iter()
                .enumerate()
                .map(|(m, h)| Complex64::new(0.0, m as f64).powu(k as u32) * h)
                .sum();
            let target = Complex64::new(0.0, -delay).powu(k as u32);
            worst = worst.max((v.conj() - target).norm() / (1.0 + target.norm()));
        }
        for k in 0..nyq {
            let v: Complex64 = f
                .taps()
                .iter()
                .enumerate()
                .map(|(m, h)| {
                    let s = if m % 2 == 1 { -1.0 } else { 1.0 };
                    Complex64::new(0.0, m as f64).powu(k as u32) * h * s
                })
                .sum();
            worst = worst.max(v.norm() / (1.0 + delay.powi(k as i32)));
        }
        worst
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        let diff: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
        assert!(diff <= tol * scale, "relative difference {}", diff / scale);
    }

    #[test]
    fn gram_edge_cases() {
        let q = stopband_gram(6, PI);
        assert!(q.iter().all(|v| v.abs() < 1e-15));
        let q = stopband_gram(6, 0.0);
        assert!((q - nalgebra::DMatrix::<f64>::identity(6, 6)).norm() < 1e-15);
    }

    /// Quadrature oracle: composite Gauss-Legendre on the defining integral.
    #[test]
    fn gram_matches_quadrature() {
        let m = 8;
        let wb = PI / 2.0;
        let q = stopband_gram(m, wb);
        // 5-point Gauss-Legendre nodes/weights on [-1, 1].
        let nodes = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        let weights = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 200;
        for a in 0..m {
            for b in 0..m {
                let k = a as f64 - b as f64;
                let h = (PI - wb) / panels as f64;
                let mut acc = 0.0;
                for p in 0..panels {
                    let mid = wb + (p as f64 + 0.5) * h;
                    for (x, w) in nodes.iter().zip(weights.iter()) {
                        acc += w * (k * (mid + 0.5 * h * x)).cos() * 0.5 * h;
                    }
                }
                assert!((q[(a, b)] - acc / PI).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_is_positive_semidefinite() {
        for &wb in &[0.0, 0.3, PI / 2.0, 2.9, PI] {
            let q = stopband_gram(24, wb);
            assert!((&q - q.transpose()).norm() == 0.0);
            let eig = q.symmetric_eigenvalues();
            assert!(eig.iter().all(|v| *v >= -1e-12));
        }
    }

    #[test]
    fn single_tap_is_unity() {
        let f = design_shaping_filter(&ShapingDesignSpec::new(1, 1, 0, 1.0)).unwrap();
        assert!((f.taps()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    /// Boxcar oracle: the optimum never leaks more than a unit-dc boxcar.
    #[test]
    fn pulse_filter_beats_boxcar() {
        let f = design_shaping_filter(&ShapingDesignSpec::new(13, 1, 0, PI / 2.0)).unwrap();
        let sum: Complex64 = f.taps().iter().sum();
        assert!((sum - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        let boxcar = FirFilter::from_real(&[1.0 / 13.0; 13]).unwrap();
        assert!(f.stopband_power(PI / 2.0) <= boxcar.stopband_power(PI / 2.0));
        assert!(f.taps().iter().all(|t| t.im.abs() < 1e-12));
    }

    #[test]
    fn receiver_filter_is_maximally_flat() {
        let f = design_shaping_filter(&ShapingDesignSpec::new(13, 8, 5, PI / 2.0)).unwrap();
        assert!((f.response(0.0).norm() - 1.0).abs() < 1e-10);
        assert!(f.response(PI).norm() < 1e-10);
        assert!(dc_and_nyquist_residuals(&f, 8, 5, 6.0) < 1e-9);
        // Four further derivatives vanish at Nyquist: check |H| ~ (pi - w)^5 near pi.
        let near = f.response(PI - 1e-2).norm();
        assert!(near < 1e-8, "{near}");
        // Symmetric taps for the centred delay.
        for m in 0..13 {
            assert!(
                (f.taps()[m] - f.taps()[12 - m]).norm() < 1e-10,
                "{:?}",
                f.taps()
            );
        }
    }

    #[test]
    fn matches_kkt_oracle() {
        let specs = [
            ShapingDesignSpec::new(13, 1, 0, PI / 2.0),
            ShapingDesignSpec::new(13, 8, 5, PI / 2.0),
            ShapingDesignSpec::new(13, 5, 1, PI),
            ShapingDesignSpec::new(21, 3, 2, 0.7).with_group_delay(4.5),
            ShapingDesignSpec::new(240, 5, 1, PI / 40.0),
        ];
        for spec in &specs {
            let f = design_shaping_filter(spec).unwrap();
            assert_close(f.taps(), &qp_oracle(spec), 1e-8);
        }
    }

    #[test]
    fn infeasible_constraint_count() {
        assert!(design_shaping_filter(&ShapingDesignSpec::new(4, 3, 2, 1.0)).is_err());
        assert!(design_shaping_filter(&ShapingDesignSpec::new(4, 1, 0, 4.0)).is_err());
        assert!(design_fractional_delay(13, 12.5, 8, 5).is_err());
    }

    #[test]
    fn interpolator_integer_delays_are_impulses() {
        for tau in [0usize, 3] {
            let f = design_fractional_delay(7, tau as f64, 7, 0).unwrap();
            for (m, t) in f.taps().iter().enumerate() {
                let expected = if m == tau { 1.0 } else { 0.0 };
                assert!(
                    (t - Complex64::new(expected, 0.0)).norm() < 1e-9,
                    "tau {tau} tap {m} {t}"
                );
            }
        }
    }

    /// Finite-difference phase-slope oracle at dc.
    #[test]
    fn fractional_delay_phase_slope() {
        let f = design_fractional_delay(13, 6.56, 8, 5).unwrap();
        let g = design_fractional_delay(13, 0.56, 8, 5).unwrap();
        for (filt, tau) in [(f, 6.56), (g, 0.56)] {
            let dw = 1e-4;
            let slope = -(filt.response(dw).arg() - filt.response(-dw).arg()) / (2.0 * dw);
            assert!((slope - tau).abs() < 1e-6, "{slope} vs {tau}");
            let res = dc_and_nyquist_residuals(&filt, 8, 5, tau);
            assert!(res < 1e-9, "{res}");
        }
    }

    #[test]
    fn null_of_boxcar_and_impulse() {
        let boxcar = FirFilter::from_real(&[1.0; 13]).unwrap();
        assert!((first_null_frequency(&boxcar) - 2.0 * PI / 13.0).abs() < 1e-9);
        assert_eq!(first_null_frequency(&FirFilter::impulse()), PI);
    }

    #[test]
    fn pulse_null_stable_under_refinement() {
        let f = design_shaping_filter(&ShapingDesignSpec::new(13, 1, 0, PI / 2.0)).unwrap();
        let coarse = first_null_frequency_with_grid(&f, 4096);
        let fine = first_null_frequency_with_grid(&f, 16384);
        assert!(coarse < PI);
        assert!((coarse - fine).abs() < 1e-3);
    }

    #[test]
    fn wider_edge_never_leaks_more_on_common_band() {
        let constraints = [(1usize, 0usize), (3, 1), (5, 2)];
        let edges = [0.2, 0.5, 1.0, 1.6, 2.4];
        for (dc, nyq) in constraints {
            for w in edges.windows(2) {
                let lo = design_shaping_filter(&ShapingDesignSpec::new(17, dc, nyq, w[0])).unwrap();
                let hi = design_shaping_filter(&ShapingDesignSpec::new(17, dc, nyq, w[1])).unwrap();
                let common = w[1];
                assert!(
                    hi.stopband_power(common) <= lo.stopband_power(common) * (1.0 + 1e-6) + 1e-12
                );
            }
        }
    }
}
