//! Random VHF communication and UHF bistatic radar scenarios, and the receiver chain.
//!
//! Waveforms are generated directly at the ADC rate with every carrier placed at
//! its aliased frequency. The element-to-element carrier phase uses the true RF
//! carrier; the baseband envelope is advanced by the matching fractional delay.
//! Each element then sees a real ADC sample, a complex mix to baseband and the
//! 13-tap receiver filter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::filters::{
    design_fractional_delay, design_shaping_filter, FirFilter, ShapingDesignSpec,
};
use crate::lcmv::SnapshotBlock;
use crate::signal::{self, mean_power};
use crate::steering::ArrayConfig;
use crate::{Complex64, Error, Result};

/// Samples kept on each side of a dwell for fractional and element delays.
const EDGE_MARGIN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    Comm,
    Radar,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "comm" => Ok(Self::Comm),
            "radar" => Ok(Self::Radar),
            other => Err(Error::Config(format!("unknown scenario '{other}'"))),
        }
    }
}

/// Every simulation parameter. Frequencies in Hz, angles in degrees,
/// amplitudes in mV at the ADC, ranges in m and velocities in m/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,

    #[serde(rename = "F_pls")]
    pub f_pls: f64,
    #[serde(rename = "B_pls")]
    pub b_pls: f64,
    #[serde(rename = "M_pls")]
    pub m_pls: usize,
    #[serde(rename = "K_pls")]
    pub k_pls: usize,
    #[serde(rename = "A_pls")]
    pub a_pls: f64,

    #[serde(rename = "N_int")]
    pub n_int: usize,
    #[serde(rename = "F_int_min")]
    pub f_int_min: f64,
    #[serde(rename = "F_int_max")]
    pub f_int_max: f64,
    #[serde(rename = "B_int")]
    pub b_int: f64,
    #[serde(rename = "A_int")]
    pub a_int: f64,
    #[serde(rename = "M_int")]
    pub m_int: usize,
    #[serde(rename = "K_int")]
    pub k_int: usize,
    /// Offset from the look direction.
    pub theta_int_min: f64,
    /// Offset from the look direction.
    pub theta_int_max: f64,

    #[serde(rename = "N_jam")]
    pub n_jam: usize,
    #[serde(rename = "F_jam")]
    pub f_jam: f64,
    #[serde(rename = "B_jam")]
    pub b_jam: f64,
    #[serde(rename = "A_jam")]
    pub a_jam: f64,
    #[serde(rename = "M_jam")]
    pub m_jam: usize,
    #[serde(rename = "K_jam")]
    pub k_jam: usize,
    pub theta_jam_min: f64,
    pub theta_jam_max: f64,

    pub sigma_theta: f64,
    pub theta_rxr_min: f64,
    pub theta_rxr_max: f64,

    #[serde(rename = "F_smp")]
    pub f_smp: f64,
    #[serde(rename = "N_smp")]
    pub n_smp: usize,
    #[serde(rename = "M_s")]
    pub m_s: usize,
    #[serde(rename = "D")]
    pub d: f64,

    #[serde(rename = "A_txr")]
    pub a_txr: f64,
    pub theta_txr_min: f64,
    pub theta_txr_max: f64,

    #[serde(rename = "N_tgt")]
    pub n_tgt: usize,
    #[serde(rename = "A_tgt")]
    pub a_tgt: f64,
    pub r_tgt_min: f64,
    pub r_tgt_max: f64,
    pub v_tgt_min: f64,
    pub v_tgt_max: f64,

    #[serde(rename = "N_clt")]
    pub n_clt: usize,
    #[serde(rename = "A_clt")]
    pub a_clt: f64,
    pub r_clt_min: f64,
    pub r_clt_max: f64,

    #[serde(rename = "N_rfl")]
    pub n_rfl: usize,
    #[serde(rename = "A_rfl")]
    pub a_rfl: f64,
    pub r_rfl_min: f64,
    pub r_rfl_max: f64,

    /// Input SNR of the reference-amplitude signal per element, dB.
    pub snr_in_db: f64,
    #[serde(rename = "F_mix")]
    pub f_mix: f64,
    /// Propagation speed, m/s.
    pub v_c: f64,
    pub seed: u64,

    /// Receiver filter length and constraint counts.
    #[serde(rename = "M_rx")]
    pub m_rx: usize,
    #[serde(rename = "K_rx_dc")]
    pub k_rx_dc: usize,
    #[serde(rename = "K_rx_pi")]
    pub k_rx_pi: usize,

    /// Fractional-delay filter length and constraint counts.
    #[serde(rename = "M_frac")]
    pub m_frac: usize,
    #[serde(rename = "K_frac_dc")]
    pub k_frac_dc: usize,
    #[serde(rename = "K_frac_pi")]
    pub k_frac_pi: usize,
}

impl ScenarioConfig {
    /// VHF communication defaults.
    pub fn comm() -> Self {
        Self {
            scenario: ScenarioKind::Comm,
            f_pls: 250e6,
            b_pls: 20e6,
            m_pls: 13,
            k_pls: 1,
            a_pls: 1.0,
            n_int: 4,
            f_int_min: 240e6,
            f_int_max: 260e6,
            b_int: 1e6,
            a_int: 100.0,
            m_int: 240,
            k_int: 5,
            theta_int_min: -30.0,
            theta_int_max: 30.0,
            n_jam: 1,
            f_jam: 250e6,
            b_jam: 40e6,
            a_jam: 1000.0,
            m_jam: 13,
            k_jam: 5,
            theta_jam_min: 45.0,
            theta_jam_max: 90.0,
            sigma_theta: 2.0,
            theta_rxr_min: -60.0,
            theta_rxr_max: 30.0,
            f_smp: 40e6,
            n_smp: 100_000,
            m_s: 8,
            d: 0.6,
            a_txr: 1000.0,
            theta_txr_min: 45.0,
            theta_txr_max: 90.0,
            n_tgt: 16,
            a_tgt: 1.0,
            r_tgt_min: 1000.0,
            r_tgt_max: 10_000.0,
            v_tgt_min: -500.0,
            v_tgt_max: -50.0,
            n_clt: 24,
            a_clt: 100.0,
            r_clt_min: 1000.0,
            r_clt_max: 10_000.0,
            n_rfl: 4,
            a_rfl: 1000.0,
            r_rfl_min: 100.0,
            r_rfl_max: 1000.0,
            snr_in_db: -30.0,
            f_mix: -10e6,
            v_c: 3e8,
            seed: 0,
            m_rx: 13,
            k_rx_dc: 8,
            k_rx_pi: 5,
            m_frac: 13,
            k_frac_dc: 8,
            k_frac_pi: 5,
        }
    }

    /// UHF radar defaults.
    pub fn radar() -> Self {
        Self {
            scenario: ScenarioKind::Radar,
            f_pls: 2.41e9,
            f_int_min: 2.40e9,
            f_int_max: 2.42e9,
            f_jam: 2.41e9,
            d: 0.0622,
            ..Self::comm()
        }
    }

    pub fn preset(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Comm => Self::comm(),
            ScenarioKind::Radar => Self::radar(),
        }
    }

    /// Overlay `key = value` pairs on this configuration. Unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &toml::Table) -> Result<Self> {
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in overrides {
            if !table.contains_key(key) {
                return Err(Error::Config(format!("unknown parameter '{key}'")));
            }
            let value = match (&table[key], value) {
                // Integers are accepted for floating-point parameters.
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
                _ => value.clone(),
            };
            table.insert(key.clone(), value);
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse flat `key = value` text. A `scenario` key picks the preset, else `default_kind`.
    pub fn from_toml_str(text: &str, default_kind: ScenarioKind) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let kind = match table.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => {
                return Err(Error::Config(format!(
                    "scenario must be a string, got {other}"
                )))
            }
            None => default_kind,
        };
        Self::preset(kind).with_overrides(&table)
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("F_int", self.f_int_min, self.f_int_max),
            ("theta_int", self.theta_int_min, self.theta_int_max),
            ("theta_jam", self.theta_jam_min, self.theta_jam_max),
            ("theta_rxr", self.theta_rxr_min, self.theta_rxr_max),
            ("theta_txr", self.theta_txr_min, self.theta_txr_max),
            ("r_tgt", self.r_tgt_min, self.r_tgt_max),
            ("v_tgt", self.v_tgt_min, self.v_tgt_max),
            ("r_clt", self.r_clt_min, self.r_clt_max),
            ("r_rfl", self.r_rfl_min, self.r_rfl_max),
        ];
        for (name, lo, hi) in ranges {
            if !(lo <= hi) {
                return Err(Error::Config(format!(
                    "{name} range is not ordered: [{lo}, {hi}]"
                )));
            }
        }
        let positive = [
            ("F_pls", self.f_pls),
            ("F_smp", self.f_smp),
            ("v_c", self.v_c),
            ("B_pls", self.b_pls),
            ("B_int", self.b_int),
            ("B_jam", self.b_jam),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let amplitudes = [
            ("A_pls", self.a_pls),
            ("A_int", self.a_int),
            ("A_jam", self.a_jam),
            ("A_txr", self.a_txr),
            ("A_tgt", self.a_tgt),
            ("A_clt", self.a_clt),
            ("A_rfl", self.a_rfl),
            ("sigma_theta", self.sigma_theta),
            ("D", self.d),
        ];
        for (name, v) in amplitudes {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.r_tgt_min <= 0.0 || self.r_clt_min <= 0.0 || self.r_rfl_min <= 0.0 {
            return Err(Error::Config("scatterer ranges must be positive".into()));
        }
        if self.m_s == 0 || self.m_pls == 0 || self.n_smp < 2 * self.m_int.max(self.m_rx) {
            return Err(Error::Config(
                "M_s, M_pls must be positive and N_smp long enough for the filters".into(),
            ));
        }
        if self.m_frac < 2 || self.k_frac_dc + self.k_frac_pi > self.m_frac {
            return Err(Error::Config(
                "fractional delay filter needs M_frac >= 2 and K_frac_dc + K_frac_pi <= M_frac"
                    .into(),
            ));
        }
        if self.snr_in_db.is_nan() {
            return Err(Error::Config("snr_in_db is NaN".into()));
        }
        Ok(())
    }

    /// Array geometry at the signal carrier.
    pub fn array(&self) -> Result<ArrayConfig> {
        ArrayConfig::with_propagation_speed(self.m_s, self.d, self.f_pls, self.v_c)
    }

    /// Complex-baseband stopband edge for a two-sided RF bandwidth.
    pub fn stopband_edge(&self, bandwidth: f64) -> f64 {
        (PI * bandwidth / self.f_smp).min(PI)
    }

    /// Nominal group delay of the receiver filter, samples.
    pub fn receiver_delay(&self) -> f64 {
        (self.m_rx as f64 - 1.0) / 2.0
    }

    /// Round-trip delay in samples for a scatterer at `range` metres.
    pub fn range_delay(&self, range: f64) -> f64 {
        2.0 * range / self.v_c * self.f_smp
    }

    /// Doppler shift in Hz of a scatterer with radial velocity `v`; closing targets are positive.
    pub fn doppler(&self, velocity: f64) -> f64 {
        doppler_shift(velocity, self.f_pls, self.v_c)
    }

    fn max_range_delay(&self) -> f64 {
        if self.scenario == ScenarioKind::Radar {
            self.range_delay(self.r_tgt_max.max(self.r_clt_max).max(self.r_rfl_max))
        } else {
            0.0
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::comm()
    }
}

/// `f_d = -2 v F / v_c`, shared by the simulator and the matched filter.
pub fn doppler_shift(velocity: f64, carrier: f64, propagation_speed: f64) -> f64 {
    -2.0 * velocity * carrier / propagation_speed
}

/// `F mod F_smp` folded into `(-F_smp/2, F_smp/2]`.
pub fn alias_frequency(frequency: f64, sample_rate: f64) -> f64 {
    let a = frequency.rem_euclid(sample_rate);
    if a > sample_rate / 2.0 {
        a - sample_rate
    } else {
        a
    }
}

/// Per-instance RNG: the master seed picks the key, the instance index the stream.
pub fn instance_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Shaping and receiver filters shared by every instance of a configuration.
#[derive(Debug, Clone)]
pub struct ScenarioFilters {
    pub pulse: FirFilter,
    pub interferer: FirFilter,
    pub jammer: FirFilter,
    pub receiver: FirFilter,
}

impl ScenarioFilters {
    pub fn design(cfg: &ScenarioConfig) -> Result<Self> {
        let pulse = design_shaping_filter(&ShapingDesignSpec::new(
            cfg.m_pls,
            cfg.k_pls,
            0,
            cfg.stopband_edge(cfg.b_pls),
        ))?;
        let interferer = design_shaping_filter(&ShapingDesignSpec::new(
            cfg.m_int,
            cfg.k_int,
            1,
            cfg.stopband_edge(cfg.b_int),
        ))?;
        let jammer = design_shaping_filter(&ShapingDesignSpec::new(
            cfg.m_jam,
            cfg.k_jam,
            1,
            cfg.stopband_edge(cfg.b_jam),
        ))?;
        let receiver = design_shaping_filter(
            &ShapingDesignSpec::new(
                cfg.m_rx,
                cfg.k_rx_dc,
                cfg.k_rx_pi,
                cfg.stopband_edge(cfg.b_pls),
            )
            .with_group_delay(cfg.receiver_delay()),
        )?;
        Ok(Self {
            pulse,
            interferer,
            jammer,
            receiver,
        })
    }

    pub fn shaping(&self, shaping: Shaping) -> &FirFilter {
        match shaping {
            Shaping::Pulse => &self.pulse,
            Shaping::Interferer => &self.interferer,
            Shaping::Jammer => &self.jammer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitterKind {
    Signal,
    Interferer,
    Jammer,
    TransmitterDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shaping {
    Pulse,
    Interferer,
    Jammer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterSpec {
    pub kind: EmitterKind,
    /// Radians from broadside.
    pub angle: f64,
    /// mV at the ADC.
    pub amplitude: f64,
    /// True RF centre frequency, Hz.
    pub centre_frequency: f64,
    pub shaping: Shaping,
    /// Initial carrier phase, radians.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScattererKind {
    Target,
    Clutter,
    Reflector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScattererSpec {
    pub kind: ScattererKind,
    /// Metres.
    pub range: f64,
    /// Radial velocity, m/s.
    pub velocity: f64,
    /// Radians from broadside.
    pub angle: f64,
    /// mV at the ADC.
    pub amplitude: f64,
    /// Carrier phase of the return, radians.
    pub phase: f64,
}

/// Baseband samples with history before and after a dwell.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<Complex64>,
    start: usize,
}

impl Waveform {
    /// `samples[start + n]` is dwell sample `n`.
    pub fn new(samples: Vec<Complex64>, start: usize) -> Self {
        Self { samples, start }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn start(&self) -> usize {
        self.start
    }

    /// The `len` samples of the dwell itself.
    pub fn dwell(&self, len: usize) -> &[Complex64] {
        &self.samples[self.start..self.start + len]
    }

    /// `w(n - delay)` for `n` in `0..len`, interpolating fractional delays.
    pub fn delayed(
        &self,
        delay: f64,
        len: usize,
        filter: &FractionalDelay,
    ) -> Result<Vec<Complex64>> {
        self.delayed_span(delay, 0, len, filter)
    }

    /// `w(n - delay)` for `n` in `first..first + len`; `first` may be negative.
    pub fn delayed_span(
        &self,
        delay: f64,
        first: isize,
        len: usize,
        filter: &FractionalDelay,
    ) -> Result<Vec<Complex64>> {
        let k = delay.round();
        let taps = filter.taps(delay - k)?;
        let centre = filter.centre as isize;
        let k = k as isize;
        // out[n] = sum_t h[t] w[start + n + centre - k - t]
        let base = self.start as isize + first + centre - k;
        let lo = base - (taps.len() as isize - 1);
        let hi = base + len as isize - 1;
        if lo < 0 || hi >= self.samples.len() as isize {
            return Err(Error::InvalidParameter(format!(
                "delay {delay} needs samples {lo}..={hi} of a {}-sample waveform",
                self.samples.len()
            )));
        }
        let base = base as usize;
        Ok((0..len)
            .map(|n| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, h) in taps.iter().enumerate() {
                    acc += h * self.samples[base + n - t];
                }
                acc
            })
            .collect())
    }

    /// As [`Waveform::delayed_span`], treating samples outside the stored span as zero.
    pub fn delayed_span_zero_filled(
        &self,
        delay: f64,
        first: isize,
        len: usize,
        filter: &FractionalDelay,
    ) -> Result<Vec<Complex64>> {
        let k = delay.round();
        let taps = filter.taps(delay - k)?;
        let base = self.start as isize + first + filter.centre as isize - k as isize;
        Ok((0..len as isize)
            .map(|n| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, h) in taps.iter().enumerate() {
                    let idx = base + n - t as isize;
                    if idx >= 0 && (idx as usize) < self.samples.len() {
                        acc += h * self.samples[idx as usize];
                    }
                }
                acc
            })
            .collect())
    }
}

/// Fractional-delay designer: the nearest integer delay is realised by indexing,
/// the remainder by a filter centred on its middle tap.
#[derive(Debug, Clone, Copy)]
pub struct FractionalDelay {
    length: usize,
    dc_order: usize,
    nyquist_order: usize,
    centre: usize,
}

impl FractionalDelay {
    pub fn new(length: usize, dc_order: usize, nyquist_order: usize) -> Result<Self> {
        if length < 2 || dc_order + nyquist_order > length {
            return Err(Error::InvalidParameter(
                "fractional delay needs length >= 2 and K <= length".into(),
            ));
        }
        Ok(Self {
            length,
            dc_order,
            nyquist_order,
            centre: (length - 1) / 2,
        })
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self> {
        Self::new(cfg.m_frac, cfg.k_frac_dc, cfg.k_frac_pi)
    }

    /// Taps delaying by `centre + fraction`, `fraction` in `[-0.5, 0.5]`.
    pub fn taps(&self, fraction: f64) -> Result<Vec<Complex64>> {
        if fraction == 0.0 {
            let mut taps = vec![Complex64::new(0.0, 0.0); self.length];
            taps[self.centre] = Complex64::new(1.0, 0.0);
            return Ok(taps);
        }
        let f = design_fractional_delay(
            self.length,
            self.centre as f64 + fraction,
            self.dc_order,
            self.nyquist_order,
        )?;
        Ok(f.taps().to_vec())
    }
}

/// One contribution to a dwell.
#[derive(Debug, Clone, Copy)]
pub struct SourceSignal<'a> {
    pub waveform: &'a Waveform,
    /// Propagation delay of the envelope at element 0, samples.
    pub delay: f64,
    /// Doppler shift, Hz.
    pub doppler: f64,
    /// Radians from broadside.
    pub angle: f64,
    /// True RF carrier, Hz.
    pub carrier: f64,
    /// mV at the ADC.
    pub amplitude: f64,
    pub phase: f64,
}

/// Impulses `exp(i phi)` every `interval` samples, `phi` uniform on
/// `{0, pi/4, pi/2, 3pi/4}`, filtered by the pulse-shaping taps.
pub fn generate_pulse_train<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    interval: usize,
    shaping: &FirFilter,
) -> Result<Vec<Complex64>> {
    if interval == 0 || length < interval {
        return Err(Error::InvalidParameter(format!(
            "pulse train of {length} samples with interval {interval}"
        )));
    }
    let mut impulses = vec![Complex64::new(0.0, 0.0); length];
    for n in (0..length).step_by(interval) {
        let k: u32 = rng.random_range(0..4);
        impulses[n] = Complex64::cis(k as f64 * PI / 4.0);
    }
    Ok(shaping.apply(&impulses))
}

/// Circular complex white Gaussian noise through the shaping filter, scaled to unit power.
pub fn generate_shaped_noise<R: Rng + ?Sized>(
    rng: &mut R,
    length: usize,
    shaping: &FirFilter,
) -> Result<Vec<Complex64>> {
    if length <= shaping.len() {
        return Err(Error::InvalidParameter(format!(
            "{length} samples for a {}-tap filter",
            shaping.len()
        )));
    }
    let warmup = shaping.len() - 1;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let white: Vec<Complex64> = (0..length + warmup)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * scale, im * scale)
        })
        .collect();
    let mut out = shaping.apply(&white).split_off(warmup);
    let p = mean_power(&out);
    if p == 0.0 {
        return Err(Error::ZeroPower);
    }
    let g = 1.0 / p.sqrt();
    out.iter_mut().for_each(|v| *v *= g);
    Ok(out)
}

/// One random draw of a scenario with both dwells synthesised.
#[derive(Debug, Clone)]
pub struct ScenarioInstance {
    pub kind: ScenarioKind,
    /// Beamformer look direction, radians.
    pub look_direction: f64,
    pub emitters: Vec<EmitterSpec>,
    pub scatterers: Vec<ScattererSpec>,
    /// Transmitted baseband `s[n]` over the data dwell.
    pub reference: Vec<Complex64>,
    /// The same waveform with its history on both sides of the dwell.
    pub transmitted: Waveform,
    /// Signal-free dwell used for covariance estimation.
    pub survey: SnapshotBlock,
    pub data: SnapshotBlock,
    /// Real ADC noise variance per element, mV^2.
    pub noise_variance: f64,
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + sd * z
}

fn phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..2.0 * PI)
}

/// Interferers and jammers for a look direction, in draw order.
fn draw_emitters<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    look: f64,
) -> Vec<EmitterSpec> {
    let mut out = Vec::with_capacity(cfg.n_int + cfg.n_jam);
    for _ in 0..cfg.n_int {
        let angle = look + uniform(rng, cfg.theta_int_min, cfg.theta_int_max).to_radians();
        let centre_frequency = uniform(rng, cfg.f_int_min, cfg.f_int_max);
        out.push(EmitterSpec {
            kind: EmitterKind::Interferer,
            angle,
            amplitude: cfg.a_int,
            centre_frequency,
            shaping: Shaping::Interferer,
            phase: phase(rng),
        });
    }
    for _ in 0..cfg.n_jam {
        let angle = uniform(rng, cfg.theta_jam_min, cfg.theta_jam_max).to_radians();
        out.push(EmitterSpec {
            kind: EmitterKind::Jammer,
            angle,
            amplitude: cfg.a_jam,
            centre_frequency: cfg.f_jam,
            shaping: Shaping::Jammer,
            phase: phase(rng),
        });
    }
    out
}

fn padded_len(cfg: &ScenarioConfig) -> (usize, usize) {
    let history = cfg.max_range_delay().ceil() as usize + EDGE_MARGIN;
    (history, history + cfg.n_smp + EDGE_MARGIN)
}

fn noise_waveform<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    shaping: &FirFilter,
) -> Result<Waveform> {
    let (start, len) = padded_len(cfg);
    Ok(Waveform::new(
        generate_shaped_noise(rng, len, shaping)?,
        start,
    ))
}

fn pulse_waveform<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    shaping: &FirFilter,
) -> Result<Waveform> {
    let (start, len) = padded_len(cfg);
    Ok(Waveform::new(
        generate_pulse_train(rng, len, cfg.m_pls, shaping)?,
        start,
    ))
}

fn emitter_source<'a>(e: &EmitterSpec, w: &'a Waveform) -> SourceSignal<'a> {
    SourceSignal {
        waveform: w,
        delay: 0.0,
        doppler: 0.0,
        angle: e.angle,
        carrier: e.centre_frequency,
        amplitude: e.amplitude,
        phase: e.phase,
    }
}

/// Noise variance giving the configured input SNR for a reference-amplitude signal.
pub fn noise_variance_for(cfg: &ScenarioConfig, reference: &[Complex64], amplitude: f64) -> f64 {
    let signal_power = amplitude * amplitude * mean_power(reference) / 2.0;
    signal_power * 10f64.powf(-cfg.snr_in_db / 10.0)
}

/// Communication draw: signal near the look direction, interferers and jammers.
pub fn sample_comm_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    filters: &ScenarioFilters,
) -> Result<ScenarioInstance> {
    cfg.validate()?;
    let look = uniform(rng, cfg.theta_rxr_min, cfg.theta_rxr_max).to_radians();
    let signal = EmitterSpec {
        kind: EmitterKind::Signal,
        angle: normal(rng, look, cfg.sigma_theta.to_radians()),
        amplitude: cfg.a_pls,
        centre_frequency: cfg.f_pls,
        shaping: Shaping::Pulse,
        phase: phase(rng),
    };
    let others = draw_emitters(rng, cfg, look);

    let pulse = pulse_waveform(rng, cfg, &filters.pulse)?;
    let mut survey_waves = Vec::with_capacity(others.len());
    let mut data_waves = Vec::with_capacity(others.len());
    for e in &others {
        survey_waves.push(noise_waveform(rng, cfg, filters.shaping(e.shaping))?);
        data_waves.push(noise_waveform(rng, cfg, filters.shaping(e.shaping))?);
    }

    let reference = pulse.dwell(cfg.n_smp).to_vec();
    let noise_variance = noise_variance_for(cfg, &reference, cfg.a_pls);
    let fd = FractionalDelay::from_config(cfg)?;

    let survey_sources: Vec<SourceSignal> = others
        .iter()
        .zip(&survey_waves)
        .map(|(e, w)| emitter_source(e, w))
        .collect();
    let survey = synthesize_snapshots(
        &survey_sources,
        cfg,
        &filters.receiver,
        &fd,
        noise_variance,
        rng,
    )?;

    let mut data_sources = vec![emitter_source(&signal, &pulse)];
    data_sources.extend(
        others
            .iter()
            .zip(&data_waves)
            .map(|(e, w)| emitter_source(e, w)),
    );
    let data = synthesize_snapshots(
        &data_sources,
        cfg,
        &filters.receiver,
        &fd,
        noise_variance,
        rng,
    )?;

    let mut emitters = vec![signal];
    emitters.extend(others);
    Ok(ScenarioInstance {
        kind: ScenarioKind::Comm,
        look_direction: look,
        emitters,
        scatterers: Vec::new(),
        reference,
        transmitted: pulse,
        survey,
        data,
        noise_variance,
    })
}

/// Radar draw: direct-path transmitter, emitters, and scatterers in the data dwell.
pub fn sample_radar_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    filters: &ScenarioFilters,
) -> Result<ScenarioInstance> {
    cfg.validate()?;
    let look = uniform(rng, cfg.theta_rxr_min, cfg.theta_rxr_max).to_radians();
    let txr = EmitterSpec {
        kind: EmitterKind::TransmitterDirect,
        angle: uniform(rng, cfg.theta_txr_min, cfg.theta_txr_max).to_radians(),
        amplitude: cfg.a_txr,
        centre_frequency: cfg.f_pls,
        shaping: Shaping::Pulse,
        phase: phase(rng),
    };
    let others = draw_emitters(rng, cfg, look);
    let sd = cfg.sigma_theta.to_radians();
    let mut scatterers = Vec::with_capacity(cfg.n_tgt + cfg.n_clt + cfg.n_rfl);
    for _ in 0..cfg.n_tgt {
        let range = uniform(rng, cfg.r_tgt_min, cfg.r_tgt_max);
        let velocity = uniform(rng, cfg.v_tgt_min, cfg.v_tgt_max);
        let angle = normal(rng, look, sd);
        scatterers.push(ScattererSpec {
            kind: ScattererKind::Target,
            range,
            velocity,
            angle,
            amplitude: cfg.a_tgt,
            phase: phase(rng),
        });
    }
    for (kind, n, amplitude, lo, hi) in [
        (
            ScattererKind::Clutter,
            cfg.n_clt,
            cfg.a_clt,
            cfg.r_clt_min,
            cfg.r_clt_max,
        ),
        (
            ScattererKind::Reflector,
            cfg.n_rfl,
            cfg.a_rfl,
            cfg.r_rfl_min,
            cfg.r_rfl_max,
        ),
    ] {
        for _ in 0..n {
            let range = uniform(rng, lo, hi);
            let angle = normal(rng, look, sd);
            scatterers.push(ScattererSpec {
                kind,
                range,
                velocity: 0.0,
                angle,
                amplitude,
                phase: phase(rng),
            });
        }
    }

    let pulse = pulse_waveform(rng, cfg, &filters.pulse)?;
    let survey_pulse = pulse_waveform(rng, cfg, &filters.pulse)?;
    let mut survey_waves = Vec::with_capacity(others.len());
    let mut data_waves = Vec::with_capacity(others.len());
    for e in &others {
        survey_waves.push(noise_waveform(rng, cfg, filters.shaping(e.shaping))?);
        data_waves.push(noise_waveform(rng, cfg, filters.shaping(e.shaping))?);
    }

    let reference = pulse.dwell(cfg.n_smp).to_vec();
    let noise_variance = noise_variance_for(cfg, &reference, cfg.a_tgt);
    let fd = FractionalDelay::from_config(cfg)?;

    let mut survey_sources = vec![emitter_source(&txr, &survey_pulse)];
    survey_sources.extend(
        others
            .iter()
            .zip(&survey_waves)
            .map(|(e, w)| emitter_source(e, w)),
    );
    let survey = synthesize_snapshots(
        &survey_sources,
        cfg,
        &filters.receiver,
        &fd,
        noise_variance,
        rng,
    )?;

    let mut data_sources = vec![emitter_source(&txr, &pulse)];
    data_sources.extend(
        others
            .iter()
            .zip(&data_waves)
            .map(|(e, w)| emitter_source(e, w)),
    );
    data_sources.extend(scatterers.iter().map(|s| SourceSignal {
        waveform: &pulse,
        delay: cfg.range_delay(s.range),
        doppler: cfg.doppler(s.velocity),
        angle: s.angle,
        carrier: cfg.f_pls,
        amplitude: s.amplitude,
        phase: s.phase,
    }));
    let data = synthesize_snapshots(
        &data_sources,
        cfg,
        &filters.receiver,
        &fd,
        noise_variance,
        rng,
    )?;

    let mut emitters = vec![txr];
    emitters.extend(others);
    Ok(ScenarioInstance {
        kind: ScenarioKind::Radar,
        look_direction: look,
        emitters,
        scatterers,
        reference,
        transmitted: pulse,
        survey,
        data,
        noise_variance,
    })
}

/// Draw an instance of the configured scenario kind.
pub fn sample_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &ScenarioConfig,
    filters: &ScenarioFilters,
) -> Result<ScenarioInstance> {
    match cfg.scenario {
        ScenarioKind::Comm => sample_comm_scenario(rng, cfg, filters),
        ScenarioKind::Radar => sample_radar_scenario(rng, cfg, filters),
    }
}

/// Per-element receiver chain.
///
/// Element `m` leads element 0 by `m D sin(theta) / v_c` seconds. Each source
/// contributes `A Re{b_m[n] exp(i (2 pi (F_alias + f_d) n / F_smp + phi + m ws sin(theta)))}`,
/// where `ws` uses the true carrier. Real white noise of `noise_variance` is added,
/// then the stream is mixed by `F_mix` and passed through the receiver filter.
pub fn synthesize_snapshots<R: Rng + ?Sized>(
    sources: &[SourceSignal],
    cfg: &ScenarioConfig,
    receiver: &FirFilter,
    fractional: &FractionalDelay,
    noise_variance: f64,
    rng: &mut R,
) -> Result<SnapshotBlock> {
    if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise variance {noise_variance}"
        )));
    }
    let n = cfg.n_smp;
    let mut real = vec![vec![0.0f64; n]; cfg.m_s];
    for src in sources {
        let f = alias_frequency(src.carrier, cfg.f_smp) + src.doppler;
        let step = 2.0 * PI * f / cfg.f_smp;
        let carrier: Vec<Complex64> = (0..n)
            .map(|k| Complex64::cis(step * k as f64 + src.phase))
            .collect();
        let sin = src.angle.sin();
        let lead = cfg.d * sin / cfg.v_c * cfg.f_smp;
        let ws = 2.0 * PI * src.carrier * cfg.d / cfg.v_c;
        for (m, out) in real.iter_mut().enumerate() {
            let b = src
                .waveform
                .delayed(src.delay - m as f64 * lead, n, fractional)?;
            let spatial = Complex64::cis(m as f64 * ws * sin) * src.amplitude;
            for ((o, b), c) in out.iter_mut().zip(&b).zip(&carrier) {
                *o += (b * c * spatial).re;
            }
        }
    }
    let sigma = noise_variance.sqrt();
    if sigma > 0.0 {
        for out in real.iter_mut() {
            for o in out.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *o += sigma * z;
            }
        }
    }
    let mix = 2.0 * PI * cfg.f_mix / cfg.f_smp;
    let oscillator: Vec<Complex64> = (0..n).map(|k| Complex64::cis(mix * k as f64)).collect();
    let streams = real
        .iter()
        .map(|r| {
            let mixed: Vec<Complex64> = r.iter().zip(&oscillator).map(|(v, o)| o * *v).collect();
            receiver.apply(&mixed)
        })
        .collect();
    SnapshotBlock::from_streams(streams)
}

/// Delay `x` by `delay` samples (integer part by shifting, fraction by filtering), zero history.
pub fn delay_signal(
    x: &[Complex64],
    delay: f64,
    fractional: &FractionalDelay,
) -> Result<Vec<Complex64>> {
    let k = delay.round();
    let taps = fractional.taps(delay - k)?;
    let filtered = signal::fir_filter(x, &taps);
    Ok(signal::shift(
        &filtered,
        k as isize - fractional.centre as isize,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.n_smp = 4000;
        cfg
    }

    #[test]
    fn alias_examples() {
        assert!((alias_frequency(250e6, 40e6) - 10e6).abs() < 1e-6);
        assert!((alias_frequency(2.41e9, 40e6) - 10e6).abs() < 1e-6);
        assert!((alias_frequency(260e6, 40e6) - 20e6).abs() < 1e-6);
        assert!((alias_frequency(275e6, 40e6) + 5e6).abs() < 1e-6);
        assert!((alias_frequency(250e6, 40e6) + (-10e6)).abs() < 1e-6);
    }

    #[test]
    fn preset_values() {
        let c = ScenarioConfig::comm();
        assert_eq!((c.n_int, c.n_jam, c.m_s, c.n_smp), (4, 1, 8, 100_000));
        let r = ScenarioConfig::radar();
        assert_eq!((r.n_tgt, r.n_clt, r.n_rfl), (16, 24, 4));
        assert_eq!(r.f_pls, 2.41e9);
        assert_eq!(r.d, 0.0622);
        // Half-wavelength spacing in both bands.
        assert!((c.array().unwrap().spatial_frequency() - PI).abs() < 1e-12);
        assert!((r.array().unwrap().spatial_frequency() - PI).abs() < 5e-3);
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ScenarioConfig::from_toml_str(
            "N_int = 2\nF_pls = 250000000\nsnr_in_db = -20.5",
            ScenarioKind::Comm,
        )
        .unwrap();
        assert_eq!(cfg.n_int, 2);
        assert_eq!(cfg.snr_in_db, -20.5);
        let radar =
            ScenarioConfig::from_toml_str("scenario = \"radar\"\nN_tgt = 3", ScenarioKind::Comm)
                .unwrap();
        assert_eq!(radar.scenario, ScenarioKind::Radar);
        assert_eq!(radar.n_tgt, 3);
        assert!(matches!(
            ScenarioConfig::from_toml_str("bogus = 1", ScenarioKind::Comm),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml_str("r_tgt_min = 20000.0", ScenarioKind::Radar),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pulse_train_with_impulse_shaping() {
        let mut rng = instance_rng(1, 0);
        let s = generate_pulse_train(&mut rng, 13 * 50, 13, &FirFilter::impulse()).unwrap();
        for (n, v) in s.iter().enumerate() {
            if n % 13 == 0 {
                assert!((v.norm() - 1.0).abs() < 1e-15);
                let k = v.arg() / (PI / 4.0);
                assert!((k - k.round()).abs() < 1e-12 && (0.0..=3.0).contains(&k.round()));
            } else {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    /// Multinomial oracle on the four phases.
    #[test]
    fn pulse_phases_uniform() {
        let mut rng = instance_rng(2, 0);
        let n = 10_000;
        let s = generate_pulse_train(&mut rng, 13 * n, 13, &FirFilter::impulse()).unwrap();
        let mut counts = [0usize; 4];
        for v in s.iter().step_by(13) {
            counts[(v.arg() / (PI / 4.0)).round() as usize] += 1;
        }
        let expected = n as f64 / 4.0;
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    /// Parseval oracle: the mean power is the shaping energy over the interval.
    #[test]
    fn pulse_train_power() {
        let cfg = ScenarioConfig::comm();
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let mut rng = instance_rng(3, 0);
        let s = generate_pulse_train(&mut rng, 200_000, 13, &filters.pulse).unwrap();
        let expected = filters.pulse.energy() / 13.0;
        assert!((mean_power(&s) / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn white_noise_statistics() {
        let mut rng = instance_rng(4, 0);
        let n = 100_000;
        let x = generate_shaped_noise(&mut rng, n, &FirFilter::impulse()).unwrap();
        assert!((mean_power(&x) - 1.0).abs() < 1e-12);
        let lag1: Complex64 =
            x.windows(2).map(|w| w[1] * w[0].conj()).sum::<Complex64>() / n as f64;
        assert!(lag1.norm() < 3.0 / (n as f64).sqrt());
    }

    /// Periodogram oracle for the narrowband interferer shaping.
    #[test]
    fn narrowband_noise_is_concentrated() {
        let cfg = ScenarioConfig::comm();
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let mut rng = instance_rng(5, 0);
        let n = 1 << 16;
        let mut x = generate_shaped_noise(&mut rng, n, &filters.interferer).unwrap();
        let mut planner = rustfft::FftPlanner::<f64>::new();
        planner.plan_fft_forward(n).process(&mut x);
        let edge = 2.0 * cfg.stopband_edge(cfg.b_int);
        let mut inside = 0.0;
        let mut total = 0.0;
        for (k, v) in x.iter().enumerate() {
            let w = 2.0
                * PI
                * (if k <= n / 2 {
                    k as f64
                } else {
                    k as f64 - n as f64
                })
                / n as f64;
            total += v.norm_sqr();
            if w.abs() <= edge {
                inside += v.norm_sqr();
            }
        }
        assert!(inside / total >= 0.95, "{}", inside / total);
    }

    #[test]
    fn comm_draw_counts_and_bounds() {
        let cfg = quiet(ScenarioConfig::comm());
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let inst = sample_comm_scenario(&mut instance_rng(6, 0), &cfg, &filters).unwrap();
        let count = |k| inst.emitters.iter().filter(|e| e.kind == k).count();
        assert_eq!(count(EmitterKind::Interferer), 4);
        assert_eq!(count(EmitterKind::Jammer), 1);
        assert_eq!(count(EmitterKind::Signal), 1);
        for e in &inst.emitters {
            if e.kind == EmitterKind::Interferer {
                assert!((240e6..=260e6).contains(&e.centre_frequency));
                assert!((e.angle - inst.look_direction).abs() <= 30f64.to_radians() + 1e-12);
            }
            if e.kind == EmitterKind::Jammer {
                assert!(e.angle >= 45f64.to_radians() && e.angle < PI / 2.0);
                assert_eq!(e.centre_frequency, 250e6);
            }
        }
        assert!(
            inst.look_direction >= -60f64.to_radians() && inst.look_direction < 30f64.to_radians()
        );
        assert!(inst.scatterers.is_empty());
        assert_eq!((inst.data.rows(), inst.data.elements()), (4000, 8));
        assert_eq!((inst.survey.rows(), inst.survey.elements()), (4000, 8));
    }

    #[test]
    fn draws_are_deterministic() {
        let cfg = quiet(ScenarioConfig::comm());
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let a = sample_comm_scenario(&mut instance_rng(7, 3), &cfg, &filters).unwrap();
        let b = sample_comm_scenario(&mut instance_rng(7, 3), &cfg, &filters).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.survey, b.survey);
        assert_eq!(a.emitters, b.emitters);
        let c = sample_comm_scenario(&mut instance_rng(7, 4), &cfg, &filters).unwrap();
        assert_ne!(a.data, c.data);
    }

    #[test]
    fn radar_draw_counts_and_bounds() {
        let mut cfg = quiet(ScenarioConfig::radar());
        cfg.n_smp = 8000;
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let inst = sample_radar_scenario(&mut instance_rng(8, 0), &cfg, &filters).unwrap();
        let count = |k| inst.scatterers.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(ScattererKind::Target), 16);
        assert_eq!(count(ScattererKind::Clutter), 24);
        assert_eq!(count(ScattererKind::Reflector), 4);
        for s in &inst.scatterers {
            match s.kind {
                ScattererKind::Target => {
                    assert!((-500.0..=-50.0).contains(&s.velocity));
                    assert!((1000.0..=10_000.0).contains(&s.range));
                }
                _ => assert_eq!(s.velocity, 0.0),
            }
        }
        assert_eq!(
            inst.emitters
                .iter()
                .filter(|e| e.kind == EmitterKind::TransmitterDirect)
                .count(),
            1
        );
    }

    fn single_source_cfg(noise_free_angle: f64) -> (ScenarioConfig, SnapshotBlock, Waveform) {
        let mut cfg = quiet(ScenarioConfig::comm());
        cfg.n_smp = 3000;
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let mut rng = instance_rng(9, 0);
        let w = pulse_waveform(&mut rng, &cfg, &filters.pulse).unwrap();
        let src = SourceSignal {
            waveform: &w,
            delay: 0.0,
            doppler: 0.0,
            angle: noise_free_angle,
            carrier: cfg.f_pls,
            amplitude: 1.0,
            phase: 0.3,
        };
        let fd = FractionalDelay::from_config(&cfg).unwrap();
        let x = synthesize_snapshots(&[src], &cfg, &filters.receiver, &fd, 0.0, &mut rng).unwrap();
        (cfg, x, w)
    }

    #[test]
    fn broadside_elements_identical() {
        let (_, x, _) = single_source_cfg(0.0);
        for m in 1..8 {
            assert_eq!(x.element(m), x.element(0));
        }
    }

    /// Cross-spectral phase oracle at the baseband carrier.
    #[test]
    fn cross_element_phase() {
        let theta = 20f64.to_radians();
        let (cfg, x, _) = single_source_cfg(theta);
        let ws = cfg.array().unwrap().spatial_frequency();
        for m in 0..7 {
            let cross: Complex64 = x
                .element(m)
                .iter()
                .zip(x.element(m + 1))
                .map(|(a, b)| a * b.conj())
                .sum();
            let expected = Complex64::cis(-ws * theta.sin());
            assert!(
                (cross / cross.norm() - expected).norm() < 1e-3,
                "{m}: {}",
                (cross / cross.norm()).arg()
            );
        }
    }

    /// Real-carrier energy accounting through an all-pass chain.
    #[test]
    fn element_power_is_half_envelope_power() {
        let mut cfg = quiet(ScenarioConfig::comm());
        cfg.n_smp = 50_000;
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let mut rng = instance_rng(10, 0);
        let w = pulse_waveform(&mut rng, &cfg, &filters.pulse).unwrap();
        let src = SourceSignal {
            waveform: &w,
            delay: 0.0,
            doppler: 0.0,
            angle: 0.1,
            carrier: cfg.f_pls,
            amplitude: cfg.a_pls,
            phase: 1.0,
        };
        let fd = FractionalDelay::from_config(&cfg).unwrap();
        let x =
            synthesize_snapshots(&[src], &cfg, &FirFilter::impulse(), &fd, 0.0, &mut rng).unwrap();
        let expected = cfg.a_pls.powi(2) * mean_power(w.dwell(cfg.n_smp)) / 2.0;
        for m in 0..8 {
            assert!((mean_power(x.element(m)) / expected - 1.0).abs() < 0.02);
        }
    }

    /// The receiver filter after the chain equals filtering an impulse-receiver output.
    #[test]
    fn receiver_filter_commutes_with_spatial_model() {
        let mut cfg = quiet(ScenarioConfig::comm());
        cfg.n_smp = 2000;
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let mut rng = instance_rng(11, 0);
        let w = noise_waveform(&mut rng, &cfg, &filters.jammer).unwrap();
        let src = SourceSignal {
            waveform: &w,
            delay: 0.0,
            doppler: 0.0,
            angle: -0.7,
            carrier: 251e6,
            amplitude: 2.0,
            phase: 0.2,
        };
        let fd = FractionalDelay::from_config(&cfg).unwrap();
        let with =
            synthesize_snapshots(&[src], &cfg, &filters.receiver, &fd, 0.0, &mut rng).unwrap();
        let without =
            synthesize_snapshots(&[src], &cfg, &FirFilter::impulse(), &fd, 0.0, &mut rng).unwrap();
        for m in 0..8 {
            let after = filters.receiver.apply(without.element(m));
            let err = after
                .iter()
                .zip(with.element(m))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10);
        }
    }

    /// A dominant jammer dominates the survey covariance.
    #[test]
    fn survey_principal_beam_points_at_jammer() {
        let mut cfg = quiet(ScenarioConfig::comm());
        cfg.n_smp = 20_000;
        cfg.n_int = 0;
        let filters = ScenarioFilters::design(&cfg).unwrap();
        let inst = sample_comm_scenario(&mut instance_rng(12, 0), &cfg, &filters).unwrap();
        let jam = inst
            .emitters
            .iter()
            .find(|e| e.kind == EmitterKind::Jammer)
            .unwrap()
            .angle;
        let r = crate::lcmv::estimate_covariance(&inst.survey, 1, 0.0).unwrap();
        let eig = r.matrix().clone().symmetric_eigen();
        let imax = eig.eigenvalues.imax();
        let v = eig.eigenvectors.column(imax).into_owned();
        let grid = crate::steering::FilterGrid::new(1, 8).unwrap();
        // With R = mean conj(x) x^T the principal eigenvector is already the matched weight.
        let h = crate::steering::WeightVector::from_stacked(grid, v).unwrap();
        let ws = cfg.array().unwrap().spatial_frequency();
        let best = (0..=1800)
            .map(|i| (-90.0 + 0.1 * i as f64).to_radians())
            .max_by(|a, b| {
                let ra = crate::steering::response(&h, 0.0, *a, ws).norm();
                let rb = crate::steering::response(&h, 0.0, *b, ws).norm();
                ra.partial_cmp(&rb).unwrap()
            })
            .unwrap();
        assert!(
            (best - jam).abs() < 5f64.to_radians(),
            "{} vs {}",
            best.to_degrees(),
            jam.to_degrees()
        );
    }

    #[test]
    fn delayed_waveform_matches_integer_shift() {
        let fd = FractionalDelay::new(13, 8, 5).unwrap();
        let samples: Vec<Complex64> = (0..200)
            .map(|k| Complex64::new(k as f64, -(k as f64)))
            .collect();
        let w = Waveform::new(samples.clone(), 50);
        let d = w.delayed(3.0, 100, &fd).unwrap();
        for n in 0..100 {
            assert!((d[n] - samples[50 + n - 3]).norm() < 1e-12);
        }
        let lead = w.delayed(-2.0, 100, &fd).unwrap();
        assert!((lead[0] - samples[52]).norm() < 1e-12);
        assert!(w.delayed(60.0, 100, &fd).is_err());
        let x: Vec<Complex64> = samples[..40].to_vec();
        let y = delay_signal(&x, 2.0, &fd).unwrap();
        assert!((y[10] - x[8]).norm() < 1e-12);
    }
}
