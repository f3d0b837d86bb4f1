//! Covariance estimation and the closed-form LCMV solution.
//!
//! For Hermitian positive-definite `R` and constraints `F^H h = d` the weights
//! minimising `h^H R h` are
//!
//! ```text
//! h = R^-1 F (F^H R^-1 F)^-1 d
//! ```
//!
//! and the minimum noise power can be written without forming `h`:
//!
//! ```text
//! P = h^H R h = d^H (F^H R^-1 F)^-1 d
//! ```
//!
//! Neither inverse is formed explicitly. `R` is Cholesky-factored, the whitened
//! constraint matrix is QR-factored after column equilibration, and both forms
//! are recovered from the triangular factors.

use crate::constraints::ConstraintSystem;
use crate::linalg::{ensure_hermitian, hermitian_form, symmetrize, WhitenedConstraints};
use crate::steering::{FilterGrid, WeightVector};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Default diagonal loading relative to the mean diagonal of `R`.
pub const DEFAULT_RELATIVE_LOADING: f64 = 1e-6;
/// Loading applied when the estimate has zero trace.
pub const ABSOLUTE_LOADING_FLOOR: f64 = 1e-12;
/// Tolerated relative asymmetry of covariance inputs.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Tolerated imaginary residue of real quadratic forms, relative to `||M|| ||v||^2`.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Complex baseband samples, `rows` time samples by `elements` antennas.
///
/// Samples are stored element by element so each antenna stream is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBlock {
    rows: usize,
    elements: usize,
    data: Vec<Complex64>,
}

impl SnapshotBlock {
    pub fn zeros(rows: usize, elements: usize) -> Self {
        Self {
            rows,
            elements,
            data: vec![Complex64::new(0.0, 0.0); rows * elements],
        }
    }

    /// Build from one stream per element; all streams must have equal length.
    pub fn from_streams(streams: Vec<Vec<Complex64>>) -> Result<Self> {
        let elements = streams.len();
        if elements == 0 {
            return Err(Error::Dimension(
                "snapshot block needs at least one element".into(),
            ));
        }
        let rows = streams[0].len();
        if streams.iter().any(|s| s.len() != rows) {
            return Err(Error::Dimension(
                "element streams have different lengths".into(),
            ));
        }
        Ok(Self {
            rows,
            elements,
            data: streams.concat(),
        })
    }

    /// Build from a time-major (row-major) sample list.
    pub fn from_rows(rows: usize, elements: usize, samples: &[Complex64]) -> Result<Self> {
        if samples.len() != rows * elements {
            return Err(Error::Dimension(format!(
                "{} samples do not fill {rows}x{elements}",
                samples.len()
            )));
        }
        let mut block = Self::zeros(rows, elements);
        for n in 0..rows {
            for m in 0..elements {
                block.data[m * rows + n] = samples[n * elements + m];
            }
        }
        Ok(block)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn element(&self, m: usize) -> &[Complex64] {
        &self.data[m * self.rows..(m + 1) * self.rows]
    }

    pub fn element_mut(&mut self, m: usize) -> &mut [Complex64] {
        &mut self.data[m * self.rows..(m + 1) * self.rows]
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.data[m * self.rows + n]
    }

    /// Stacked delay-line vector at time `n`: entry `m_s * taps + m_t` is `x[n - m_t, m_s]`.
    pub fn stacked(&self, n: usize, taps: usize) -> CVector {
        CVector::from_fn(taps * self.elements, |idx, _| {
            let (m_s, m_t) = (idx / taps, idx % taps);
            self.get(n - m_t, m_s)
        })
    }
}

/// Hermitian positive-definite spatiotemporal noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    matrix: CMatrix,
    grid: FilterGrid,
    loading: f64,
}

impl CovarianceMatrix {
    pub fn new(matrix: CMatrix, grid: FilterGrid) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, grid needs {}",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        ensure_hermitian(&matrix, HERMITIAN_TOLERANCE)?;
        Ok(Self {
            matrix,
            grid,
            loading: 0.0,
        })
    }

    pub fn identity(grid: FilterGrid) -> Self {
        Self {
            matrix: CMatrix::identity(grid.len(), grid.len()),
            grid,
            loading: 0.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> FilterGrid {
        self.grid
    }

    /// Absolute diagonal loading that was added to the raw estimate.
    pub fn loading(&self) -> f64 {
        self.loading
    }
}

/// `(F^H R^-1 F)^-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualGram(CMatrix);

impl DualGram {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        ensure_hermitian(&matrix, 1e-9)?;
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.nrows()
    }
}

/// Sample covariance of stacked delay-line vectors, diagonally loaded.
///
/// The estimate averages the `N - M_t + 1` complete windows,
/// `R[a, b] = mean(conj(v_a) v_b)`, so that `h^H R h` is the mean output power
/// `|sum h[m_t, m_s] x[n - m_t, m_s]|^2` of the weights applied without
/// conjugation. `relative_loading * trace(R) / (M_s M_t)` is then added to the
/// diagonal, or [`ABSOLUTE_LOADING_FLOOR`] when the trace is zero.
pub fn estimate_covariance(
    x: &SnapshotBlock,
    taps: usize,
    relative_loading: f64,
) -> Result<CovarianceMatrix> {
    let grid = FilterGrid::new(taps, x.elements())?;
    if x.rows() < taps {
        return Err(Error::TooFewSnapshots {
            got: x.rows(),
            need: taps,
        });
    }
    if !(relative_loading >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "loading must be non-negative, got {relative_loading}"
        )));
    }
    let windows = x.rows() - taps + 1;
    let mut r = if x.rows() >= 4 * taps {
        lagged_sums(x, taps)
    } else {
        direct_sums(x, taps)
    };
    r /= Complex64::new(windows as f64, 0.0);
    symmetrize(&mut r);

    let n = grid.len();
    let trace: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    let loading = if trace > 0.0 {
        relative_loading * trace / n as f64
    } else {
        ABSOLUTE_LOADING_FLOOR
    };
    for i in 0..n {
        r[(i, i)] += Complex64::new(loading, 0.0);
    }
    Ok(CovarianceMatrix {
        matrix: r,
        grid,
        loading,
    })
}

fn direct_sums(x: &SnapshotBlock, taps: usize) -> CMatrix {
    let n = taps * x.elements();
    let mut r = CMatrix::zeros(n, n);
    for t in (taps - 1)..x.rows() {
        let v = x.stacked(t, taps).conjugate();
        r.ger(
            Complex64::new(1.0, 0.0),
            &v,
            &v.conjugate(),
            Complex64::new(1.0, 0.0),
        );
    }
    r
}

/// Exact window sums via per-lag cross products: the bulk of each sum is shared
/// by every tap pair with the same lag, only the edges differ.
fn lagged_sums(x: &SnapshotBlock, taps: usize) -> CMatrix {
    let rows = x.rows();
    let grid = FilterGrid {
        taps,
        elements: x.elements(),
    };
    let mut r = CMatrix::zeros(grid.len(), grid.len());
    let t1 = taps as isize - 1;
    for ms_a in 0..x.elements() {
        let a = x.element(ms_a);
        for ms_b in ms_a..x.elements() {
            let b = x.element(ms_b);
            for lag in -t1..=t1 {
                // Term conj(a[j]) b[j + lag], core range j in [T-1, N-T].
                let core_lo = taps - 1;
                let core_hi = rows - taps;
                let mut core = Complex64::new(0.0, 0.0);
                for j in core_lo..=core_hi {
                    core += a[j].conj() * b[(j as isize + lag) as usize];
                }
                for mt_a in 0..taps {
                    let mt_b = mt_a as isize - lag;
                    if mt_b < 0 || mt_b >= taps as isize {
                        continue;
                    }
                    // Window for this tap pair is j in [T-1-mt_a, N-1-mt_a].
                    let mut sum = core;
                    for j in (taps - 1 - mt_a)..core_lo {
                        sum += a[j].conj() * b[(j as isize + lag) as usize];
                    }
                    for j in (core_hi + 1)..=(rows - 1 - mt_a) {
                        sum += a[j].conj() * b[(j as isize + lag) as usize];
                    }
                    r[(grid.index(mt_a, ms_a), grid.index(mt_b as usize, ms_b))] = sum;
                }
            }
        }
    }
    // Fill the blocks below the element diagonal by Hermitian symmetry.
    for ms_a in 0..x.elements() {
        for ms_b in 0..ms_a {
            for mt_a in 0..taps {
                for mt_b in 0..taps {
                    let v = r[(grid.index(mt_b, ms_b), grid.index(mt_a, ms_a))].conj();
                    r[(grid.index(mt_a, ms_a), grid.index(mt_b, ms_b))] = v;
                }
            }
        }
    }
    r
}

/// `h = R^-1 F (F^H R^-1 F)^-1 d`.
pub fn solve_weights(r: &CovarianceMatrix, sys: &ConstraintSystem) -> Result<WeightVector> {
    let whitened = WhitenedConstraints::new(r.matrix(), &sys.matrix)?;
    WeightVector::from_stacked(r.grid(), whitened.weights(&sys.targets)?)
}

/// `P = h^H R h`.
pub fn noise_power(h: &WeightVector, r: &CovarianceMatrix) -> Result<f64> {
    if h.len() != r.grid().len() {
        return Err(Error::Dimension(format!(
            "weights have {} entries, covariance {}",
            h.len(),
            r.grid().len()
        )));
    }
    let v = h.as_vector();
    hermitian_form(r.matrix(), v, IMAGINARY_TOLERANCE)
}

/// `A = (F^H R^-1 F)^-1`.
pub fn dual_gram(r: &CovarianceMatrix, f: &CMatrix) -> Result<DualGram> {
    let whitened = WhitenedConstraints::new(r.matrix(), f)?;
    Ok(DualGram(whitened.dual_gram()?))
}

/// `P = d^H A d`.
pub fn noise_power_dual(d: &CVector, a: &DualGram) -> Result<f64> {
    if d.len() != a.size() {
        return Err(Error::Dimension(format!(
            "{} targets for a {}x{} dual Gram",
            d.len(),
            a.size(),
            a.size()
        )));
    }
    hermitian_form(a.matrix(), d, IMAGINARY_TOLERANCE)
}

/// Weights together with the dual Gram from a single factorisation.
pub fn solve_with_dual(
    r: &CovarianceMatrix,
    sys: &ConstraintSystem,
) -> Result<(WeightVector, DualGram)> {
    let whitened = WhitenedConstraints::new(r.matrix(), &sys.matrix)?;
    let h = WeightVector::from_stacked(r.grid(), whitened.weights(&sys.targets)?)?;
    Ok((h, DualGram(whitened.dual_gram()?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{derivative_system, DerivativeConstraintSpec};
    use crate::steering::basis_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    fn random_block(rng: &mut ChaCha8Rng, rows: usize, elements: usize) -> SnapshotBlock {
        let samples: Vec<Complex64> = (0..rows * elements).map(|_| cgauss(rng)).collect();
        SnapshotBlock::from_rows(rows, elements, &samples).unwrap()
    }

    fn random_pd(rng: &mut ChaCha8Rng, grid: FilterGrid) -> CovarianceMatrix {
        let n = grid.len();
        let b = CMatrix::from_fn(n, 2 * n, |_, _| cgauss(rng));
        let mut m = &b * b.adjoint() / Complex64::new(2.0 * n as f64, 0.0)
            + CMatrix::identity(n, n) * Complex64::new(0.05, 0.0);
        symmetrize(&mut m);
        CovarianceMatrix::new(m, grid).unwrap()
    }

    /// Brute-force oracle: sum conj(v) v^T over every window.
    fn brute_force_covariance(x: &SnapshotBlock, taps: usize) -> CMatrix {
        let n = taps * x.elements();
        let mut r = CMatrix::zeros(n, n);
        for t in (taps - 1)..x.rows() {
            let v = x.stacked(t, taps);
            for a in 0..n {
                for b in 0..n {
                    r[(a, b)] += v[a].conj() * v[b];
                }
            }
        }
        r / Complex64::new((x.rows() - taps + 1) as f64, 0.0)
    }

    #[test]
    fn zero_input_gets_absolute_floor() {
        let x = SnapshotBlock::zeros(50, 3);
        let r = estimate_covariance(&x, 4, DEFAULT_RELATIVE_LOADING).unwrap();
        let expected = CMatrix::identity(12, 12) * Complex64::new(ABSOLUTE_LOADING_FLOOR, 0.0);
        assert_eq!(r.matrix(), &expected);
        assert_eq!(r.loading(), ABSOLUTE_LOADING_FLOOR);
    }

    #[test]
    fn single_window_is_outer_product_plus_loading() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_block(&mut rng, 3, 2);
        let r = estimate_covariance(&x, 3, 1e-3).unwrap();
        let v = x.stacked(2, 3).conjugate();
        let outer = &v * v.adjoint();
        let trace: f64 = (0..6).map(|i| outer[(i, i)].re).sum();
        let expected = outer + CMatrix::identity(6, 6) * Complex64::new(1e-3 * trace / 6.0, 0.0);
        assert!((r.matrix() - expected).norm() < 1e-13);
        assert!(crate::linalg::hermitian_asymmetry(r.matrix()) < 1e-15);
    }

    #[test]
    fn too_few_snapshots() {
        let x = SnapshotBlock::zeros(3, 2);
        assert!(matches!(
            estimate_covariance(&x, 4, 0.0),
            Err(Error::TooFewSnapshots { .. })
        ));
    }

    #[test]
    fn lagged_estimator_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(rows, elements, taps) in &[(40, 3, 4), (97, 2, 9), (64, 4, 1), (30, 1, 7)] {
            let x = random_block(&mut rng, rows, elements);
            let r = estimate_covariance(&x, taps, 0.0).unwrap();
            let oracle = brute_force_covariance(&x, taps);
            assert!(
                (r.matrix() - &oracle).norm() <= 1e-12 * oracle.norm(),
                "{rows} {elements} {taps}"
            );
        }
    }

    #[test]
    fn estimate_independent_of_window_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_block(&mut rng, 60, 3);
        let taps = 3;
        let r = estimate_covariance(&x, taps, 0.0).unwrap();
        // Accumulate windows in reverse and interleaved order.
        let mut order: Vec<usize> = ((taps - 1)..x.rows()).rev().collect();
        order.sort_by_key(|t| (t % 7, usize::MAX - t));
        let mut acc = CMatrix::zeros(9, 9);
        for t in order {
            let v = x.stacked(t, taps).conjugate();
            acc += &v * v.adjoint();
        }
        acc /= Complex64::new((x.rows() - taps + 1) as f64, 0.0);
        assert!((r.matrix() - acc).norm() <= 1e-12 * r.matrix().norm());
    }

    #[test]
    fn white_noise_estimate_near_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = random_block(&mut rng, 100_000, 4);
        let r = estimate_covariance(&x, 3, DEFAULT_RELATIVE_LOADING).unwrap();
        let err = r.matrix() - CMatrix::identity(12, 12);
        let spectral = err.clone().singular_values().max();
        assert!(spectral < 0.05, "spectral error {spectral}");
    }

    #[test]
    fn covariance_quadratic_form_is_output_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_block(&mut rng, 200, 3);
        let taps = 4;
        let grid = FilterGrid::new(taps, 3).unwrap();
        let h = WeightVector::from_stacked(grid, CVector::from_fn(12, |_, _| cgauss(&mut rng)))
            .unwrap();
        let r = estimate_covariance(&x, taps, 0.0).unwrap();
        let mut power = 0.0;
        for t in (taps - 1)..x.rows() {
            let y: Complex64 = x
                .stacked(t, taps)
                .iter()
                .zip(h.as_vector().iter())
                .map(|(a, b)| a * b)
                .sum();
            power += y.norm_sqr();
        }
        power /= (x.rows() - taps + 1) as f64;
        let p = noise_power(&h, &r).unwrap();
        assert!((p - power).abs() < 1e-12 * power);
    }

    #[test]
    fn identity_covariance_unity_constraint() {
        let grid = FilterGrid::new(9, 8).unwrap();
        let theta = 0.3;
        let ws = 2.9;
        let spec = DerivativeConstraintSpec::new(1, 0, theta, 0.0).unwrap();
        let sys = derivative_system(&spec, grid, ws).unwrap();
        let r = CovarianceMatrix::identity(grid);
        let h = solve_weights(&r, &sys).unwrap();
        let expected = basis_vector(0.0, theta, grid, ws) / Complex64::new(72.0, 0.0);
        assert!((h.as_vector() - expected).norm() < 1e-14);
        assert!((noise_power(&h, &r).unwrap() - 1.0 / 72.0).abs() < 1e-15);
        let a = dual_gram(&r, &sys.matrix).unwrap();
        assert!((a.matrix()[(0, 0)] - Complex64::new(1.0 / 72.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dual_power_examples() {
        let a = DualGram::new(CMatrix::identity(3, 3)).unwrap();
        let e0 = CVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        assert_eq!(noise_power_dual(&e0, &a).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = CMatrix::from_fn(3, 3, |_, _| cgauss(&mut rng));
        let a = DualGram::new(&m * m.adjoint()).unwrap();
        let d = CVector::from_fn(3, |_, _| cgauss(&mut rng));
        let c = Complex64::new(1.5, -2.0);
        let p = noise_power_dual(&d, &a).unwrap();
        let pc = noise_power_dual(&(&d * c), &a).unwrap();
        assert!((pc - c.norm_sqr() * p).abs() < 1e-12 * pc);
    }

    #[test]
    fn kkt_oracle_agreement() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let grid = FilterGrid::new(6, 4).unwrap();
        for _ in 0..10 {
            let r = random_pd(&mut rng, grid);
            let f = CMatrix::from_fn(24, 4, |_, _| cgauss(&mut rng));
            let d = CVector::from_fn(4, |_, _| cgauss(&mut rng));
            let sys = ConstraintSystem::new(f.clone(), d.clone()).unwrap();
            let h = solve_weights(&r, &sys).unwrap();
            // [[R, F], [F^H, 0]] [h; l] = [0; d]
            let mut kkt = CMatrix::zeros(28, 28);
            kkt.view_mut((0, 0), (24, 24)).copy_from(r.matrix());
            kkt.view_mut((0, 24), (24, 4)).copy_from(&f);
            kkt.view_mut((24, 0), (4, 24)).copy_from(&f.adjoint());
            let mut rhs = CVector::zeros(28);
            rhs.rows_mut(24, 4).copy_from(&d);
            let sol = kkt.lu().solve(&rhs).unwrap();
            let oracle = sol.rows(0, 24).into_owned();
            assert!((h.as_vector() - &oracle).norm() <= 1e-8 * oracle.norm());
        }
    }

    #[test]
    fn rank_deficient_constraints() {
        let grid = FilterGrid::new(3, 2).unwrap();
        let r = CovarianceMatrix::identity(grid);
        let col = CVector::from_fn(6, |i, _| Complex64::new(i as f64 + 1.0, 0.0));
        let mut f = CMatrix::zeros(6, 2);
        f.set_column(0, &col);
        f.set_column(1, &(&col * Complex64::new(0.0, 2.0)));
        let sys =
            ConstraintSystem::new(f, CVector::from_element(2, Complex64::new(1.0, 0.0))).unwrap();
        assert!(matches!(
            solve_weights(&r, &sys),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn non_hermitian_covariance_rejected() {
        let grid = FilterGrid::new(2, 1).unwrap();
        let mut m = CMatrix::identity(2, 2);
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(matches!(
            CovarianceMatrix::new(m, grid),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let grid = FilterGrid::new(2, 1).unwrap();
        let mut m = CMatrix::identity(2, 2);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        let r = CovarianceMatrix::new(m, grid).unwrap();
        let sys = ConstraintSystem::new(
            CMatrix::identity(2, 1),
            CVector::from_element(1, Complex64::new(1.0, 0.0)),
        )
        .unwrap();
        assert!(matches!(
            solve_weights(&r, &sys),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn primal_and_dual_power_agree_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let grid = FilterGrid::new(9, 8).unwrap();
        let r = random_pd(&mut rng, grid);
        let spec = DerivativeConstraintSpec::new(5, 2, -0.4, 3.3).unwrap();
        let sys = derivative_system(&spec, grid, 2.0).unwrap();
        let (h, a) = solve_with_dual(&r, &sys).unwrap();
        let p = noise_power(&h, &r).unwrap();
        let pd = noise_power_dual(&sys.targets, &a).unwrap();
        assert!((p - pd).abs() <= 1e-9 * (1.0 + pd));
        assert!(sys.relative_residual(&h) <= 1e-9);
        assert!(crate::linalg::hermitian_asymmetry(a.matrix()) <= 1e-12);

        // Perturbations in the null space of F^H never lower the power.
        let f = &sys.matrix;
        let proj = f * (f.adjoint() * f).try_inverse().unwrap() * f.adjoint();
        let eye = CMatrix::identity(72, 72);
        for _ in 0..100 {
            let z = CVector::from_fn(72, |_, _| cgauss(&mut rng)) * Complex64::new(1e-2, 0.0);
            let p_null = (&eye - &proj) * z;
            let moved = WeightVector::from_stacked(grid, h.as_vector() + p_null).unwrap();
            assert!(noise_power(&moved, &r).unwrap() >= p - 1e-10);
        }
    }
}
