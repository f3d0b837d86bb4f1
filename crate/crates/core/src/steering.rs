//! Array geometry, spatiotemporal basis vectors and the angle-frequency response.
//!
//! Weights are stored column-stacked: all `M_t` taps of element 0 come first,
//! so the stacked index of `(m_t, m_s)` is `m_s * M_t + m_t`.
//!
//! The response of weights `h` at temporal frequency `w` (radians/sample) and
//! angle `theta` (radians from broadside) is
//!
//! ```text
//! H(w, theta) = sum_{m_s, m_t} h[m_t, m_s] exp(i (m_s ws sin(theta) - m_t w)) = f(w, theta)^H h
//! ```
//!
//! where `f` has entries `exp(i (m_t w - m_s ws sin(theta)))`.

use std::f64::consts::PI;

use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default floor for magnitude responses expressed in dB.
pub const DEFAULT_DB_FLOOR: f64 = -100.0;

/// Uniform linear array geometry and carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    pub element_count: usize,
    /// Element spacing in metres.
    pub element_spacing: f64,
    /// RF carrier in Hz.
    pub carrier_frequency: f64,
    /// Propagation speed in m/s.
    pub propagation_speed: f64,
}

impl ArrayConfig {
    pub fn new(element_count: usize, element_spacing: f64, carrier_frequency: f64) -> Result<Self> {
        Self::with_propagation_speed(
            element_count,
            element_spacing,
            carrier_frequency,
            SPEED_OF_LIGHT,
        )
    }

    pub fn with_propagation_speed(
        element_count: usize,
        element_spacing: f64,
        carrier_frequency: f64,
        propagation_speed: f64,
    ) -> Result<Self> {
        if element_count == 0 {
            return Err(Error::InvalidParameter(
                "array needs at least one element".into(),
            ));
        }
        // Zero spacing is admitted as the degenerate collapsed array.
        if !(element_spacing >= 0.0 && element_spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "element spacing must be non-negative, got {element_spacing}"
            )));
        }
        if !(carrier_frequency > 0.0 && carrier_frequency.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "carrier frequency must be positive, got {carrier_frequency}"
            )));
        }
        if !(propagation_speed > 0.0 && propagation_speed.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "propagation speed must be positive, got {propagation_speed}"
            )));
        }
        Ok(Self {
            element_count,
            element_spacing,
            carrier_frequency,
            propagation_speed,
        })
    }

    pub fn wavelength(&self) -> f64 {
        self.propagation_speed / self.carrier_frequency
    }

    /// `true` when `D <= lambda/2`, i.e. the angular response has no grating lobes.
    pub fn is_unambiguous(&self) -> bool {
        self.element_spacing <= 0.5 * self.wavelength() * (1.0 + 1e-12)
    }

    pub fn spatial_frequency(&self) -> f64 {
        spatial_frequency(self)
    }

    /// Spatial frequency seen by a component offset `offset_hz` from the carrier.
    pub fn spatial_frequency_at(&self, offset_hz: f64) -> f64 {
        2.0 * PI * (self.carrier_frequency + offset_hz) * self.element_spacing
            / self.propagation_speed
    }
}

/// Spatial frequency in radians per spatial sample, `2 pi F_c D / v_c`.
pub fn spatial_frequency(cfg: &ArrayConfig) -> f64 {
    2.0 * PI * cfg.carrier_frequency * cfg.element_spacing / cfg.propagation_speed
}

/// Shape of a spatiotemporal filter: `taps` delays on each of `elements` antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterGrid {
    pub taps: usize,
    pub elements: usize,
}

impl FilterGrid {
    pub fn new(taps: usize, elements: usize) -> Result<Self> {
        if taps == 0 || elements == 0 {
            return Err(Error::InvalidParameter(format!(
                "filter grid needs taps >= 1 and elements >= 1, got {taps}x{elements}"
            )));
        }
        Ok(Self { taps, elements })
    }

    /// Stacked length `M_s * M_t`.
    pub fn len(&self) -> usize {
        self.taps * self.elements
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, tap: usize, element: usize) -> usize {
        element * self.taps + tap
    }
}

/// Stacked complex beamformer weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    grid: FilterGrid,
    values: CVector,
}

impl WeightVector {
    pub fn from_stacked(grid: FilterGrid, values: CVector) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "weight vector has {} entries, grid {}x{} needs {}",
                values.len(),
                grid.taps,
                grid.elements,
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Stack a `M_t x M_s` weight matrix column by column.
    pub fn from_matrix(matrix: &CMatrix) -> Result<Self> {
        let grid = FilterGrid::new(matrix.nrows(), matrix.ncols())?;
        // nalgebra storage is column-major, which is exactly the stacking order.
        Ok(Self {
            grid,
            values: CVector::from_column_slice(matrix.as_slice()),
        })
    }

    /// Unit impulse at `(tap, element)`.
    pub fn impulse(grid: FilterGrid, tap: usize, element: usize) -> Self {
        let mut values = CVector::zeros(grid.len());
        values[grid.index(tap, element)] = Complex64::new(1.0, 0.0);
        Self { grid, values }
    }

    pub fn to_matrix(&self) -> CMatrix {
        CMatrix::from_column_slice(self.grid.taps, self.grid.elements, self.values.as_slice())
    }

    pub fn grid(&self) -> FilterGrid {
        self.grid
    }

    pub fn get(&self, tap: usize, element: usize) -> Complex64 {
        self.values[self.grid.index(tap, element)]
    }

    pub fn as_vector(&self) -> &CVector {
        &self.values
    }

    pub fn into_vector(self) -> CVector {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Basis vector `f(w, theta)` with entries `exp(i (m_t w - m_s ws sin(theta)))`.
pub fn basis_vector(omega_t: f64, theta: f64, grid: FilterGrid, omega_s: f64) -> CVector {
    let spatial = omega_s * theta.sin();
    CVector::from_fn(grid.len(), |idx, _| {
        let (m_s, m_t) = (idx / grid.taps, idx % grid.taps);
        Complex64::cis(m_t as f64 * omega_t - m_s as f64 * spatial)
    })
}

/// Angle-frequency response `H(w, theta) = f(w, theta)^H h`.
pub fn response(h: &WeightVector, omega_t: f64, theta: f64, omega_s: f64) -> Complex64 {
    let grid = h.grid();
    let spatial = omega_s * theta.sin();
    let mut acc = Complex64::new(0.0, 0.0);
    for m_s in 0..grid.elements {
        // Horner over taps: sum_m h[m] z^m with z = exp(-i w).
        let z = Complex64::cis(-omega_t);
        let mut inner = Complex64::new(0.0, 0.0);
        for m_t in (0..grid.taps).rev() {
            inner = inner * z + h.get(m_t, m_s);
        }
        acc += inner * Complex64::cis(m_s as f64 * spatial);
    }
    acc
}

/// Magnitude response in dB sampled on a frequency x angle grid.
///
/// Values are stored row-major with one row per frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseGrid {
    pub omegas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub db: Vec<f64>,
}

impl ResponseGrid {
    pub fn at(&self, omega_index: usize, theta_index: usize) -> f64 {
        self.db[omega_index * self.thetas.len() + theta_index]
    }
}

pub fn magnitude_db(value: Complex64, floor_db: f64) -> f64 {
    let mag = value.norm();
    if mag > 0.0 {
        (20.0 * mag.log10()).max(floor_db)
    } else {
        floor_db
    }
}

pub fn response_grid(
    h: &WeightVector,
    omegas: &[f64],
    thetas: &[f64],
    omega_s: f64,
    floor_db: f64,
) -> Result<ResponseGrid> {
    if omegas.is_empty() || thetas.is_empty() {
        return Err(Error::InvalidParameter(
            "response grid axes must be non-empty".into(),
        ));
    }
    let mut db = Vec::with_capacity(omegas.len() * thetas.len());
    for &w in omegas {
        for &t in thetas {
            db.push(magnitude_db(response(h, w, t, omega_s), floor_db));
        }
    }
    Ok(ResponseGrid {
        omegas: omegas.to_vec(),
        thetas: thetas.to_vec(),
        db,
    })
}
