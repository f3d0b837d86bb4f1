//! The six beamformer variants and application of spatiotemporal weights.
//!
//! | kind | description |
//! |------|-------------|
//! | A | spatial MVDR, one tap |
//! | B | per-channel MVDR on a Kaiser-windowed DFT, folded to equivalent taps |
//! | C | LCMV with linear-phase unity-gain point constraints on DFT bin centres |
//! | D | LCMV with dc/Nyquist derivative constraints, centred group delay |
//! | E | as D, with the group delay that minimises the noise power |
//! | F | as D, with the smallest feasible stationary group delay |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::constraints::{
    build_f_point, derivative_system, DerivativeConstraintSpec, PointConstraintSpec,
};
use crate::delay::{
    minimize_latency_delay, minimize_power_delay, power_polynomial, DelaySelection,
};
use crate::filters::{first_null_frequency, FirFilter};
use crate::lcmv::{
    dual_gram, estimate_covariance, noise_power, solve_weights, CovarianceMatrix, SnapshotBlock,
};
use crate::steering::{basis_vector, response, ArrayConfig, FilterGrid, WeightVector};
use crate::{CMatrix, CVector, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BeamformerKind {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 6] = [
        BeamformerKind::A,
        BeamformerKind::B,
        BeamformerKind::C,
        BeamformerKind::D,
        BeamformerKind::E,
        BeamformerKind::F,
    ];

    /// Temporal taps of the designed weights.
    pub fn taps(self, bank: &BankConfig) -> usize {
        match self {
            BeamformerKind::A => 1,
            BeamformerKind::B => bank.dft_len,
            BeamformerKind::C => bank.point_taps,
            BeamformerKind::D | BeamformerKind::E | BeamformerKind::F => bank.derivative_taps,
        }
    }

    /// Taps of the covariance the design is computed from (A uses a sub-block).
    pub fn covariance_taps(self, bank: &BankConfig) -> usize {
        match self {
            BeamformerKind::A => 1,
            other => other.taps(bank),
        }
    }

    /// Parse a comma-separated list such as `A,C,E`.
    pub fn parse_list(s: &str) -> Result<Vec<BeamformerKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let k: BeamformerKind = part.parse()?;
            if !out.contains(&k) {
                out.push(k);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("empty variant list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for BeamformerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            BeamformerKind::A => "A",
            BeamformerKind::B => "B",
            BeamformerKind::C => "C",
            BeamformerKind::D => "D",
            BeamformerKind::E => "E",
            BeamformerKind::F => "F",
        };
        f.write_str(c)
    }
}

impl FromStr for BeamformerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_start_matches("BMF-") {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            "F" => Ok(Self::F),
            other => Err(Error::Config(format!(
                "unknown beamformer variant '{other}'"
            ))),
        }
    }
}

/// Parameters of every variant.
#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    /// B: DFT length.
    pub dft_len: usize,
    /// B: channels centred on dc.
    pub dft_channels: usize,
    /// B: Kaiser main-lobe width relative to the rectangular window.
    pub kaiser_width_factor: f64,
    /// C: taps.
    pub point_taps: usize,
    /// C: unity-gain bins centred on dc.
    pub point_bins: usize,
    /// C: add zero-magnitude constraints on the remaining bins.
    pub point_stopband_zeros: bool,
    /// D/E/F: taps.
    pub derivative_taps: usize,
    pub dc_order: usize,
    pub nyquist_order: usize,
    /// Diagonal loading relative to the mean diagonal of each covariance.
    pub relative_loading: f64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            dft_len: 9,
            dft_channels: 7,
            kaiser_width_factor: 2.0,
            point_taps: 9,
            point_bins: 5,
            point_stopband_zeros: false,
            derivative_taps: 9,
            dc_order: 5,
            nyquist_order: 2,
            relative_loading: crate::lcmv::DEFAULT_RELATIVE_LOADING,
        }
    }
}

/// What a design produced.
#[derive(Debug, Clone)]
pub struct DesignReport {
    pub kind: BeamformerKind,
    pub weights: WeightVector,
    /// Group delay in samples.
    pub group_delay: f64,
    /// `h^H R h` on the covariance used for the design.
    pub power: f64,
    /// Delay selection details for E and F.
    pub delay_selection: Option<DelaySelection>,
    /// `||F^H h - d|| / (1 + ||d||)` for variants designed from one constraint system.
    pub constraint_residual: Option<f64>,
}

/// Shared inputs for designing every variant on one survey.
#[derive(Debug, Clone, Copy)]
pub struct DesignInputs<'a> {
    pub survey: &'a SnapshotBlock,
    /// Radians from broadside.
    pub look_direction: f64,
    pub array: ArrayConfig,
    /// ADC rate in Hz, used for the per-channel squint of B.
    pub sample_rate: f64,
}

/// Design every requested variant, estimating each distinct covariance once.
pub fn design_bank(
    inputs: &DesignInputs,
    kinds: &[BeamformerKind],
    bank: &BankConfig,
) -> Vec<Result<DesignReport>> {
    let mut cache: Vec<(usize, Result<CovarianceMatrix>)> = Vec::new();
    kinds
        .iter()
        .map(|&kind| {
            let taps = kind.covariance_taps(bank);
            if !cache.iter().any(|(t, _)| *t == taps) {
                cache.push((
                    taps,
                    estimate_covariance(inputs.survey, taps, bank.relative_loading),
                ));
            }
            let r = match &cache.iter().find(|(t, _)| *t == taps).unwrap().1 {
                Ok(r) => r,
                Err(e) => return Err(Error::Config(format!("covariance estimate failed: {e}"))),
            };
            design(
                kind,
                r,
                inputs.look_direction,
                &inputs.array,
                bank,
                inputs.sample_rate,
            )
        })
        .collect()
}

/// Design one variant from a covariance of the right shape.
///
/// A accepts either the one-tap spatial covariance or any spatiotemporal one,
/// in which case the lag-0 block is used.
pub fn design(
    kind: BeamformerKind,
    r: &CovarianceMatrix,
    look_direction: f64,
    array: &ArrayConfig,
    bank: &BankConfig,
    sample_rate: f64,
) -> Result<DesignReport> {
    if r.grid().elements != array.element_count {
        return Err(Error::Dimension(format!(
            "covariance has {} elements, array {}",
            r.grid().elements,
            array.element_count
        )));
    }
    let ws = array.spatial_frequency();
    match kind {
        BeamformerKind::A => {
            let spatial = spatial_block(r)?;
            let grid = spatial.grid();
            let f = basis_vector(0.0, look_direction, grid, ws);
            let sys = crate::constraints::ConstraintSystem::new(
                CMatrix::from_column_slice(f.len(), 1, f.as_slice()),
                CVector::from_element(1, Complex64::new(1.0, 0.0)),
            )?;
            let h = solve_weights(&spatial, &sys)?;
            let power = noise_power(&h, &spatial)?;
            let constraint_residual = Some(sys.relative_residual(&h));
            Ok(DesignReport {
                kind,
                weights: h,
                group_delay: 0.0,
                power,
                delay_selection: None,
                constraint_residual,
            })
        }
        BeamformerKind::B => {
            let params = DftParams::from_bank(bank);
            Ok(design_dft_mvdr(r, look_direction, array, &params, sample_rate)?.report)
        }
        BeamformerKind::C => {
            expect_taps(r, bank.point_taps)?;
            let sys = point_system(look_direction, bank, r.grid(), ws)?;
            let h = solve_weights(r, &sys)?;
            let power = noise_power(&h, r)?;
            let constraint_residual = Some(sys.relative_residual(&h));
            Ok(DesignReport {
                kind,
                weights: h,
                group_delay: centre_delay(bank.point_taps),
                power,
                delay_selection: None,
                constraint_residual,
            })
        }
        BeamformerKind::D | BeamformerKind::E | BeamformerKind::F => {
            expect_taps(r, bank.derivative_taps)?;
            let taps = bank.derivative_taps;
            let spec = DerivativeConstraintSpec::new(
                bank.dc_order,
                bank.nyquist_order,
                look_direction,
                centre_delay(taps),
            )?;
            let selection = if kind == BeamformerKind::D {
                None
            } else {
                let sys = derivative_system(&spec, r.grid(), ws)?;
                let a = dual_gram(r, &sys.matrix)?;
                let poly = power_polynomial(&a, bank.dc_order, bank.nyquist_order)?;
                Some(if kind == BeamformerKind::E {
                    minimize_power_delay(&poly, taps)?
                } else {
                    minimize_latency_delay(&poly, taps)?
                })
            };
            let q = selection
                .as_ref()
                .map_or(spec.group_delay, |s| s.group_delay);
            let sys = derivative_system(&spec.with_group_delay(q), r.grid(), ws)?;
            let h = solve_weights(r, &sys)?;
            let power = noise_power(&h, r)?;
            let constraint_residual = Some(sys.relative_residual(&h));
            Ok(DesignReport {
                kind,
                weights: h,
                group_delay: q,
                power,
                delay_selection: selection,
                constraint_residual,
            })
        }
    }
}

/// Constraint system of variant C for a grid.
pub fn point_system(
    look_direction: f64,
    bank: &BankConfig,
    grid: FilterGrid,
    omega_s: f64,
) -> Result<crate::constraints::ConstraintSystem> {
    let half = (bank.point_bins / 2) as i64;
    let bins: Vec<i64> = (-half..=half).collect();
    let mut spec = PointConstraintSpec::linear_phase_bins(
        look_direction,
        bank.dft_len,
        &bins,
        centre_delay(grid.taps),
    );
    if bank.point_stopband_zeros {
        let zeros = grid.taps.saturating_sub(bins.len());
        let mut k = half + 1;
        while spec.points.len() < bins.len() + zeros {
            for s in [k, -k] {
                if spec.points.len() < bins.len() + zeros {
                    spec.points.push((
                        2.0 * PI * s as f64 / bank.dft_len as f64,
                        Complex64::new(0.0, 0.0),
                    ));
                }
            }
            k += 1;
        }
    }
    build_f_point(&spec, grid, omega_s)
}

fn centre_delay(taps: usize) -> f64 {
    (taps as f64 - 1.0) / 2.0
}

fn expect_taps(r: &CovarianceMatrix, taps: usize) -> Result<()> {
    if r.grid().taps != taps {
        return Err(Error::Dimension(format!(
            "covariance has {} taps, design needs {taps}",
            r.grid().taps
        )));
    }
    Ok(())
}

/// The `m_t = 0` block of a spatiotemporal covariance.
fn spatial_block(r: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    let g = r.grid();
    if g.taps == 1 {
        return Ok(r.clone());
    }
    let grid = FilterGrid::new(1, g.elements)?;
    let m = CMatrix::from_fn(g.elements, g.elements, |a, b| {
        r.matrix()[(g.index(0, a), g.index(0, b))]
    });
    CovarianceMatrix::new(m, grid)
}

/// Parameters of the DFT-channelised MVDR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftParams {
    pub dft_len: usize,
    pub channels: usize,
    pub kaiser_width_factor: f64,
}

impl DftParams {
    pub fn from_bank(bank: &BankConfig) -> Self {
        Self {
            dft_len: bank.dft_len,
            channels: bank.dft_channels,
            kaiser_width_factor: bank.kaiser_width_factor,
        }
    }

    /// Channel indices `k`, centred on dc.
    pub fn bins(&self) -> Vec<i64> {
        let half = (self.channels / 2) as i64;
        (-half..=half).collect()
    }
}

/// B design with its intermediate quantities.
#[derive(Debug, Clone)]
pub struct DftMvdrDesign {
    pub report: DesignReport,
    pub window: Vec<f64>,
    pub kaiser_beta: f64,
    /// Analysis taps per channel, `a_k[m_t]`.
    pub analysis: Vec<Vec<Complex64>>,
    /// Spatial weights per channel.
    pub channel_weights: Vec<CVector>,
    /// Spatial frequency used for each channel.
    pub channel_spatial_frequency: Vec<f64>,
    /// Complex gain applied so the folded look-direction dc response is one.
    pub synthesis_gain: Complex64,
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = bessel_i0(beta);
    (0..len)
        .map(|t| {
            let x = 2.0 * t as f64 / (len as f64 - 1.0) - 1.0;
            bessel_i0(beta * (1.0 - x * x).max(0.0).sqrt()) / denom
        })
        .collect()
}

/// Kaiser `beta` whose first spectral null sits at `width_factor * 2 pi / len`.
pub fn kaiser_beta_for_width(len: usize, width_factor: f64) -> Result<f64> {
    let target = width_factor * 2.0 * PI / len as f64;
    if len < 2 || !(width_factor >= 1.0) || target >= PI {
        return Err(Error::InvalidParameter(format!(
            "no Kaiser window of length {len} has its first null at {width_factor} times the rectangular one"
        )));
    }
    let null = |beta: f64| -> f64 {
        let w = kaiser_window(len, beta);
        first_null_frequency(&FirFilter::from_real(&w).expect("non-empty window"))
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while null(hi) < target {
        hi *= 2.0;
        if hi > 200.0 {
            return Err(Error::InvalidParameter(format!(
                "Kaiser width factor {width_factor} unreachable"
            )));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if null(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Channelised MVDR folded into equivalent spatiotemporal weights.
///
/// Channel `k` is the Kaiser-windowed DFT bin `w_k = 2 pi k / M_DFT`, evaluated
/// with linear phase about the window centre: `a_k[m] = w[m] exp(i w_k (m - c)) / sum(w)`.
/// Its spatial covariance is `A_k^H R A_k`, which equals the sample covariance of
/// the windowed DFT outputs over the same windows. Each channel gets a spatial
/// MVDR steered with that channel's spatial frequency, and the equivalent taps are
/// `h[m_t, m_s] = g * sum_k a_k[m_t] g_k[m_s]`, with `g` normalising the folded
/// look-direction dc response.
pub fn design_dft_mvdr(
    r: &CovarianceMatrix,
    look_direction: f64,
    array: &ArrayConfig,
    params: &DftParams,
    sample_rate: f64,
) -> Result<DftMvdrDesign> {
    expect_taps(r, params.dft_len)?;
    if params.channels == 0 || params.channels > params.dft_len || params.channels % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "{} channels on a {}-point DFT (need an odd count no larger than the DFT)",
            params.channels, params.dft_len
        )));
    }
    let m = params.dft_len;
    let ms = array.element_count;
    let beta = kaiser_beta_for_width(m, params.kaiser_width_factor)?;
    let window = kaiser_window(m, beta);
    let wsum: f64 = window.iter().sum();
    let centre = centre_delay(m);
    let grid = r.grid();
    let spatial_grid = FilterGrid::new(1, ms)?;

    let mut analysis = Vec::new();
    let mut channel_weights = Vec::new();
    let mut channel_ws = Vec::new();
    let mut h = CMatrix::zeros(m, ms);
    for k in params.bins() {
        let wk = 2.0 * PI * k as f64 / m as f64;
        let a: Vec<Complex64> = (0..m)
            .map(|t| Complex64::cis(wk * (t as f64 - centre)) * (window[t] / wsum))
            .collect();
        // A_k maps stacked snapshots to the channel's spatial snapshot.
        let mut ak = CMatrix::zeros(grid.len(), ms);
        for s in 0..ms {
            for t in 0..m {
                ak[(grid.index(t, s), s)] = a[t];
            }
        }
        let mut rk = ak.adjoint() * r.matrix() * &ak;
        crate::linalg::symmetrize(&mut rk);
        let rk = CovarianceMatrix::new(rk, spatial_grid)?;
        let ws_k = array.spatial_frequency_at(k as f64 * sample_rate / m as f64);
        let f = basis_vector(0.0, look_direction, spatial_grid, ws_k);
        let sys = crate::constraints::ConstraintSystem::new(
            CMatrix::from_column_slice(ms, 1, f.as_slice()),
            CVector::from_element(1, Complex64::new(1.0, 0.0)),
        )?;
        let g = solve_weights(&rk, &sys)?;
        for s in 0..ms {
            for t in 0..m {
                h[(t, s)] += a[t] * g.as_vector()[s];
            }
        }
        analysis.push(a);
        channel_weights.push(g.as_vector().clone());
        channel_ws.push(ws_k);
    }
    let folded = WeightVector::from_matrix(&h)?;
    let dc = response(&folded, 0.0, look_direction, array.spatial_frequency());
    if dc.norm() == 0.0 {
        return Err(Error::ZeroPower);
    }
    let gain = Complex64::new(1.0, 0.0) / dc;
    let weights = WeightVector::from_matrix(&(h * gain))?;
    let power = noise_power(&weights, r)?;
    Ok(DftMvdrDesign {
        report: DesignReport {
            kind: BeamformerKind::B,
            weights,
            group_delay: centre,
            power,
            delay_selection: None,
            constraint_residual: None,
        },
        window,
        kaiser_beta: beta,
        analysis,
        channel_weights,
        channel_spatial_frequency: channel_ws,
        synthesis_gain: gain,
    })
}

/// `y[n] = sum h[m_t, m_s] x[n - m_t, m_s]` for `n = M_t - 1 .. N - 1`.
pub fn apply(h: &WeightVector, x: &SnapshotBlock) -> Result<Vec<Complex64>> {
    let g = h.grid();
    if g.elements != x.elements() {
        return Err(Error::Dimension(format!(
            "weights for {} elements, data has {}",
            g.elements,
            x.elements()
        )));
    }
    if x.rows() < g.taps {
        return Err(Error::TooFewSnapshots {
            got: x.rows(),
            need: g.taps,
        });
    }
    let first = g.taps - 1;
    let len = x.rows() - first;
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for s in 0..g.elements {
        let stream = x.element(s);
        for t in 0..g.taps {
            let w = h.get(t, s);
            if w == Complex64::new(0.0, 0.0) {
                continue;
            }
            let src = &stream[first - t..first - t + len];
            for (out, v) in y.iter_mut().zip(src) {
                *out += w * v;
            }
        }
    }
    Ok(y)
}

/// [`apply`] padded with `M_t - 1` leading zeros so index `n` is time `n`.
pub fn apply_aligned(h: &WeightVector, x: &SnapshotBlock) -> Result<Vec<Complex64>> {
    let y = apply(h, x)?;
    let mut out = vec![Complex64::new(0.0, 0.0); h.grid().taps - 1];
    out.extend(y);
    Ok(out)
}
