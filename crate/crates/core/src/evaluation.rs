//! Scoring of beamformer outputs.
//!
//! Communication outputs are scored by a least-squares fit to the delayed
//! transmitted waveform. Radar outputs are downsampled by two, stripped of
//! zero-Doppler returns by a least-squares (Wiener) canceller, passed through a
//! Doppler-shifted matched-filter bank and scored on the range-Doppler map.

use rayon::prelude::*;

use crate::scenario::{FractionalDelay, ScattererKind, ScattererSpec, ScenarioConfig, Waveform};
use crate::signal::{fir_filter, Correlator};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Relative diagonal regularisation of the zero-Doppler canceller.
pub const WIENER_REGULARISATION: f64 = 1e-6;
/// Range cells of the radar map.
pub const RANGE_CELLS: usize = 1337;
/// Velocity cells of the radar map (odd, centred on zero).
pub const VELOCITY_CELLS: usize = 49;
/// Guard ring around each target excluded from the noise average.
pub const DEFAULT_GUARD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommScore {
    pub p_est: f64,
    pub p_err: f64,
    /// `+inf` when the fit is exact.
    pub snr_db: f64,
    pub gain: Complex64,
    pub alignment_delay: f64,
}

impl CommScore {
    pub fn is_exact(&self) -> bool {
        self.p_err == 0.0
    }
}

/// Fit `alpha y` to an already aligned reference.
pub fn fit_snr(y: &[Complex64], s_d: &[Complex64], alignment_delay: f64) -> Result<CommScore> {
    if y.len() != s_d.len() {
        return Err(Error::Dimension(format!(
            "output has {} samples, reference {}",
            y.len(),
            s_d.len()
        )));
    }
    let yy: f64 = y.iter().map(|v| v.norm_sqr()).sum();
    if !(yy > 0.0) {
        return Err(Error::ZeroPower);
    }
    let ys: Complex64 = y.iter().zip(s_d).map(|(a, b)| a.conj() * b).sum();
    let gain = ys / yy;
    let mut p_est = 0.0;
    let mut p_err = 0.0;
    for (a, b) in y.iter().zip(s_d) {
        let e = gain * a;
        p_est += e.norm_sqr();
        p_err += (e - b).norm_sqr();
    }
    let snr_db = if p_err == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (p_est / p_err).log10()
    };
    Ok(CommScore {
        p_est,
        p_err,
        snr_db,
        gain,
        alignment_delay,
    })
}

/// Score `y`, where `y[j]` is time `first + j`, against `s` delayed by `processing_delay`.
pub fn comm_snr(
    y: &[Complex64],
    first: usize,
    s: &Waveform,
    processing_delay: f64,
    fractional: &FractionalDelay,
) -> Result<CommScore> {
    let s_d = s.delayed_span(processing_delay, first as isize, y.len(), fractional)?;
    fit_snr(y, &s_d, processing_delay)
}

/// Keep every `factor`-th sample starting with the first.
pub fn downsample(x: &[Complex64], factor: usize) -> Vec<Complex64> {
    x.iter().step_by(factor.max(1)).copied().collect()
}

/// A reference `s[n]` known for `n` in `-history..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedReference {
    samples: Vec<Complex64>,
    history: usize,
}

impl LaggedReference {
    /// `samples[history + n]` is `s[n]`.
    pub fn new(samples: Vec<Complex64>, history: usize) -> Result<Self> {
        if history > samples.len() {
            return Err(Error::Dimension(format!(
                "history {history} longer than {} samples",
                samples.len()
            )));
        }
        Ok(Self { samples, history })
    }

    /// Reference with zero history.
    pub fn without_history(samples: Vec<Complex64>) -> Self {
        Self {
            samples,
            history: 0,
        }
    }

    /// `s[n]`, zero outside the known span.
    pub fn at(&self, n: isize) -> Complex64 {
        let j = n + self.history as isize;
        if j >= 0 && (j as usize) < self.samples.len() {
            self.samples[j as usize]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn history(&self) -> usize {
        self.history
    }

    /// Samples at `n >= 0`.
    pub fn len(&self) -> usize {
        self.samples.len() - self.history
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `s[n]` for `n` in `-(span)..len`, zero-filled where unknown.
    fn extended(&self, span: usize) -> Vec<Complex64> {
        (-(span as isize)..self.len() as isize)
            .map(|n| self.at(n))
            .collect()
    }

    /// Transmitted waveform delayed by `delay` at the full rate, then downsampled.
    ///
    /// The history covers lags `0..max_lag` after downsampling; any part the
    /// waveform does not hold is zero.
    pub fn from_waveform(
        w: &Waveform,
        delay: f64,
        dwell: usize,
        factor: usize,
        max_lag: usize,
        fractional: &FractionalDelay,
    ) -> Result<Self> {
        let history = max_lag.saturating_sub(1);
        let first = -((history * factor) as isize);
        let full =
            w.delayed_span_zero_filled(delay, first, history * factor + dwell, fractional)?;
        Self::new(downsample(&full, factor), history)
    }
}

/// Correlations `c[l] = sum_{n < N} z[n] conj(s[n - l])` for `l` in `0..max_lag`.
struct LagCorrelator {
    correlator: Correlator,
    spectrum: Vec<Complex64>,
    span: usize,
    len: usize,
}

impl LagCorrelator {
    fn new(reference: &LaggedReference, len: usize, max_lag: usize) -> Self {
        let span = max_lag.saturating_sub(1);
        let mut ext = reference.extended(span);
        ext.resize(span + len, Complex64::new(0.0, 0.0));
        let correlator = Correlator::new(span + len, max_lag);
        let spectrum = correlator.spectrum(&ext);
        Self {
            correlator,
            spectrum,
            span,
            len,
        }
    }

    fn correlate(&self, z: &[Complex64], max_lag: usize) -> Vec<Complex64> {
        let mut padded = vec![Complex64::new(0.0, 0.0); self.span];
        padded.extend_from_slice(&z[..self.len.min(z.len())]);
        self.correlator
            .correlate_with(&padded, &self.spectrum, max_lag)
    }
}

/// Least-squares canceller of zero-Doppler returns over lags `0..max_lag`.
///
/// The Gram `G[a, b] = sum_n conj(s[n - a]) s[n - b]` is formed exactly, with
/// the first column by correlation and the rest by the diagonal recurrence,
/// and factored once so several outputs can share it.
pub struct ZeroDopplerSuppressor {
    reference: LaggedReference,
    max_lag: usize,
    len: usize,
    chol: nalgebra::linalg::Cholesky<Complex64, nalgebra::Dyn>,
    correlator: LagCorrelator,
}

impl ZeroDopplerSuppressor {
    /// Canceller for outputs of `len` samples.
    pub fn new(reference: LaggedReference, len: usize, max_lag: usize) -> Result<Self> {
        if max_lag == 0 {
            return Err(Error::InvalidParameter("zero lags".into()));
        }
        if reference.len() < len || reference.len() < max_lag {
            return Err(Error::Dimension(format!(
                "reference has {} samples, need {} for {max_lag} lags",
                reference.len(),
                len.max(max_lag)
            )));
        }
        let correlator = LagCorrelator::new(&reference, len, max_lag);
        let s_dwell: Vec<Complex64> = (0..len as isize).map(|n| reference.at(n)).collect();
        // G[a, 0] = sum_n s[n] conj(s[n - a]), the correlation of s with itself.
        let col0 = correlator.correlate(&s_dwell, max_lag);
        let mut g = CMatrix::zeros(max_lag, max_lag);
        for a in 0..max_lag {
            g[(a, 0)] = col0[a];
        }
        let n = len as isize;
        for b in 0..max_lag - 1 {
            for a in b..max_lag - 1 {
                let (ai, bi) = (a as isize, b as isize);
                let add = reference.at(-1 - ai).conj() * reference.at(-1 - bi);
                let sub = reference.at(n - 1 - ai).conj() * reference.at(n - 1 - bi);
                g[(a + 1, b + 1)] = g[(a, b)] + add - sub;
            }
        }
        for b in 0..max_lag {
            g[(b, b)].im = 0.0;
            for a in b + 1..max_lag {
                g[(b, a)] = g[(a, b)].conj();
            }
        }
        let mean_diag = (0..max_lag).map(|i| g[(i, i)].re).sum::<f64>() / max_lag as f64;
        if !(mean_diag > 0.0) {
            return Err(Error::ZeroPower);
        }
        let eps = WIENER_REGULARISATION * mean_diag;
        for i in 0..max_lag {
            g[(i, i)].re += eps;
        }
        let chol = nalgebra::linalg::Cholesky::new(g).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            reference,
            max_lag,
            len,
            chol,
            correlator,
        })
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Least-squares coefficients for `y`.
    pub fn coefficients(&self, y: &[Complex64]) -> Result<CVector> {
        if y.len() != self.len {
            return Err(Error::Dimension(format!(
                "output has {} samples, canceller built for {}",
                y.len(),
                self.len
            )));
        }
        // b[l] = sum_n conj(s[n - l]) y[n]
        let b = CVector::from_vec(self.correlator.correlate(y, self.max_lag));
        Ok(self.chol.solve(&b))
    }

    /// `y - sum_l g_l s[n - l]`.
    pub fn suppress(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let g = self.coefficients(y)?;
        let span = self.max_lag - 1;
        let ext = self.reference.extended(span);
        let taps: Vec<Complex64> = g.iter().copied().collect();
        let fit = fir_filter(&ext, &taps);
        Ok(y.iter()
            .enumerate()
            .map(|(n, v)| v - fit[n + span])
            .collect())
    }
}

/// One-shot canceller; see [`ZeroDopplerSuppressor`].
pub fn suppress_zero_doppler(
    y_ds: &[Complex64],
    reference: &LaggedReference,
    max_lag: usize,
) -> Result<Vec<Complex64>> {
    ZeroDopplerSuppressor::new(reference.clone(), y_ds.len(), max_lag)?.suppress(y_ds)
}

/// Axes of the range-Doppler map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeDopplerGrid {
    pub range_cells: usize,
    /// Odd, centred on zero velocity.
    pub velocity_cells: usize,
    /// Sample rate of the processed (downsampled) data, Hz.
    pub sample_rate: f64,
    /// Processed dwell length in samples.
    pub dwell: usize,
    pub carrier: f64,
    pub propagation_speed: f64,
}

impl RangeDopplerGrid {
    pub fn new(
        range_cells: usize,
        velocity_cells: usize,
        sample_rate: f64,
        dwell: usize,
        carrier: f64,
        propagation_speed: f64,
    ) -> Result<Self> {
        if range_cells == 0 || velocity_cells % 2 == 0 || dwell == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid {range_cells} x {velocity_cells} over {dwell} samples (velocity cells must be odd)"
            )));
        }
        for v in [sample_rate, carrier, propagation_speed] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "grid rate/carrier/speed {v}"
                )));
            }
        }
        Ok(Self {
            range_cells,
            velocity_cells,
            sample_rate,
            dwell,
            carrier,
            propagation_speed,
        })
    }

    /// Map of a radar scenario after downsampling by two.
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(
            RANGE_CELLS,
            VELOCITY_CELLS,
            cfg.f_smp / 2.0,
            cfg.n_smp / 2,
            cfg.f_pls,
            cfg.v_c,
        )
    }

    /// Metres per range cell.
    pub fn range_resolution(&self) -> f64 {
        self.propagation_speed / (2.0 * self.sample_rate)
    }

    pub fn dwell_time(&self) -> f64 {
        self.dwell as f64 / self.sample_rate
    }

    /// Metres per second per velocity cell.
    pub fn velocity_resolution(&self) -> f64 {
        self.propagation_speed / self.carrier / (2.0 * self.dwell_time())
    }

    fn half(&self) -> i64 {
        (self.velocity_cells / 2) as i64
    }

    /// Signed velocity index of column `j`.
    pub fn velocity_index(&self, j: usize) -> i64 {
        j as i64 - self.half()
    }

    pub fn zero_velocity_column(&self) -> usize {
        self.velocity_cells / 2
    }

    pub fn range(&self, l: usize) -> f64 {
        l as f64 * self.range_resolution()
    }

    pub fn velocity(&self, j: usize) -> f64 {
        self.velocity_index(j) as f64 * self.velocity_resolution()
    }

    /// Doppler of column `j`, with closing (negative) velocities giving positive shifts.
    pub fn doppler(&self, j: usize) -> f64 {
        crate::scenario::doppler_shift(self.velocity(j), self.carrier, self.propagation_speed)
    }

    pub fn max_range(&self) -> f64 {
        self.range(self.range_cells - 1)
    }

    pub fn max_velocity(&self) -> f64 {
        self.velocity(self.velocity_cells - 1)
    }

    /// Nearest `(range, velocity)` cell, if inside the map.
    pub fn nearest_cell(&self, range: f64, velocity: f64) -> Option<(usize, usize)> {
        let l = (range / self.range_resolution()).round();
        let k = (velocity / self.velocity_resolution()).round() as i64;
        if !(l >= 0.0 && l < self.range_cells as f64) || k.abs() > self.half() {
            return None;
        }
        Some((l as usize, (k + self.half()) as usize))
    }
}

/// Magnitude-squared map, `power[l * velocity_cells + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub grid: RangeDopplerGrid,
    pub power: Vec<f64>,
}

impl RangeDopplerMap {
    pub fn get(&self, l: usize, j: usize) -> f64 {
        self.power[l * self.grid.velocity_cells + j]
    }

    /// Cell with the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) =
            self.power
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });
        (i / self.grid.velocity_cells, i % self.grid.velocity_cells)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.power.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

/// Doppler-shifted matched-filter bank over the grid.
///
/// Cell `(l, j) = |sum_n x[n] conj(s[n - l] exp(i 2 pi f_j n / F))|^2`.
pub fn range_doppler_map(
    residual: &[Complex64],
    reference: &LaggedReference,
    grid: &RangeDopplerGrid,
) -> Result<RangeDopplerMap> {
    let len = residual.len();
    if reference.len() < len {
        return Err(Error::Dimension(format!(
            "reference has {} samples, residual {len}",
            reference.len()
        )));
    }
    let correlator = LagCorrelator::new(reference, len, grid.range_cells);
    let columns: Vec<Vec<f64>> = (0..grid.velocity_cells)
        .into_par_iter()
        .map(|j| {
            let w = -2.0 * std::f64::consts::PI * grid.doppler(j) / grid.sample_rate;
            let z: Vec<Complex64> = residual
                .iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::cis(w * n as f64))
                .collect();
            correlator
                .correlate(&z, grid.range_cells)
                .into_iter()
                .map(|c| c.norm_sqr())
                .collect()
        })
        .collect();
    let mut power = vec![0.0; grid.range_cells * grid.velocity_cells];
    for (j, col) in columns.iter().enumerate() {
        for (l, v) in col.iter().enumerate() {
            power[l * grid.velocity_cells + j] = *v;
        }
    }
    Ok(RangeDopplerMap { grid: *grid, power })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarScore {
    pub signal_power: f64,
    pub noise_power: f64,
    pub snr_db: f64,
    /// Distinct `(range, velocity)` cells holding targets.
    pub target_cells: Vec<(usize, usize)>,
    /// `true` where a cell is left out of the noise average.
    pub excluded: Vec<bool>,
}

/// Mean target-cell power over the mean of the remaining cells.
///
/// The zero-velocity column, the target cells and a `guard` ring around each
/// target are excluded from the noise average.
pub fn radar_snr(
    map: &RangeDopplerMap,
    truth: &[ScattererSpec],
    guard: usize,
) -> Result<RadarScore> {
    let g = &map.grid;
    let mut targets: Vec<(usize, usize)> = truth
        .iter()
        .filter(|s| s.kind == ScattererKind::Target)
        .filter_map(|s| g.nearest_cell(s.range, s.velocity))
        .collect();
    targets.sort_unstable();
    targets.dedup();
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    let nv = g.velocity_cells;
    let mut excluded = vec![false; g.range_cells * nv];
    for l in 0..g.range_cells {
        excluded[l * nv + g.zero_velocity_column()] = true;
    }
    for &(l, j) in &targets {
        let (l0, l1) = (l.saturating_sub(guard), (l + guard).min(g.range_cells - 1));
        let (j0, j1) = (j.saturating_sub(guard), (j + guard).min(nv - 1));
        for ll in l0..=l1 {
            for jj in j0..=j1 {
                excluded[ll * nv + jj] = true;
            }
        }
    }
    let signal_power =
        targets.iter().map(|&(l, j)| map.get(l, j)).sum::<f64>() / targets.len() as f64;
    let (sum, count) = map
        .power
        .iter()
        .zip(&excluded)
        .filter(|(_, &e)| !e)
        .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
    if count == 0 {
        return Err(Error::InvalidParameter(
            "every cell is excluded from the noise average".into(),
        ));
    }
    let noise_power = sum / count as f64;
    let snr_db = 10.0 * (signal_power / noise_power).log10();
    Ok(RadarScore {
        signal_power,
        noise_power,
        snr_db,
        target_cells: targets,
        excluded,
    })
}
