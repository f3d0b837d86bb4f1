//! Seeded Monte-Carlo campaigns over the beamformer bank.
//!
//! Instance `i` draws from its own stream of the master seed, so results do not
//! depend on scheduling and a failed instance never disturbs the others.
//! Instances run on the rayon pool and are reduced in index order.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::beamformer::{
    apply, apply_aligned, design_bank, BankConfig, BeamformerKind, DesignInputs, DesignReport,
};
use crate::constraints::{build_d, derivative_system, DerivativeConstraintSpec};
use crate::delay::{
    minimize_latency_delay, minimize_power_delay, power_polynomial, DelaySelection,
};
use crate::evaluation::{
    comm_snr, downsample, radar_snr, range_doppler_map, LaggedReference, RangeDopplerGrid,
    ZeroDopplerSuppressor, DEFAULT_GUARD,
};
use crate::lcmv::{dual_gram, estimate_covariance, noise_power_dual};
use crate::scenario::{
    delay_signal, instance_rng, sample_scenario, FractionalDelay, ScenarioConfig, ScenarioFilters,
    ScenarioInstance, ScenarioKind,
};
use crate::steering::{response_grid, ResponseGrid};
use crate::{Error, Result};

/// Radar outputs are processed at half the ADC rate.
pub const RADAR_DOWNSAMPLE: usize = 2;
/// Step of the exported `P(q)` curve.
pub const DELAY_CURVE_STEP: f64 = 0.01;
/// Floor of exported response magnitudes.
pub const RESPONSE_FLOOR_DB: f64 = -200.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub variants: Vec<BeamformerKind>,
    pub n_mc: usize,
    pub seed: u64,
    pub bank: BankConfig,
    pub out_dir: Option<PathBuf>,
}

const BANK_KEYS: [&str; 10] = [
    "dft_len",
    "dft_channels",
    "kaiser_width_factor",
    "point_taps",
    "point_bins",
    "point_stopband_zeros",
    "derivative_taps",
    "dc_order",
    "nyquist_order",
    "relative_loading",
];

impl ExperimentConfig {
    /// Defaults: every variant, 100 comm or 30 radar instances, the scenario's seed.
    pub fn new(scenario: ScenarioConfig) -> Self {
        let n_mc = match scenario.scenario {
            ScenarioKind::Comm => 100,
            ScenarioKind::Radar => 30,
        };
        Self {
            seed: scenario.seed,
            scenario,
            variants: BeamformerKind::ALL.to_vec(),
            n_mc,
            bank: BankConfig::default(),
            out_dir: None,
        }
    }

    /// Flat `key = value` text: scenario parameters plus `n_mc`, `variants` and bank parameters.
    pub fn from_toml_str(text: &str, default_kind: ScenarioKind) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let n_mc = table.remove("n_mc");
        let variants = table.remove("variants");
        let mut bank_table = toml::Table::new();
        for key in BANK_KEYS {
            if let Some(v) = table.remove(key) {
                bank_table.insert(key.to_string(), v);
            }
        }
        let kind = match table.get("scenario") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => {
                return Err(Error::Config(format!(
                    "scenario must be a string, got {other}"
                )))
            }
            None => default_kind,
        };
        let scenario = ScenarioConfig::preset(kind).with_overrides(&table)?;
        let mut cfg = Self::new(scenario);
        if let Some(v) = n_mc {
            cfg.n_mc = match v {
                toml::Value::Integer(i) if i >= 1 => i as usize,
                other => {
                    return Err(Error::Config(format!(
                        "n_mc must be a positive integer, got {other}"
                    )))
                }
            };
        }
        if let Some(v) = variants {
            cfg.variants = match v {
                toml::Value::String(s) => BeamformerKind::parse_list(&s)?,
                toml::Value::Array(items) => {
                    let parts: Result<Vec<String>> = items
                        .into_iter()
                        .map(|i| match i {
                            toml::Value::String(s) => Ok(s),
                            other => Err(Error::Config(format!(
                                "variant must be a string, got {other}"
                            ))),
                        })
                        .collect();
                    BeamformerKind::parse_list(&parts?.join(","))?
                }
                other => {
                    return Err(Error::Config(format!(
                        "variants must be a string or list, got {other}"
                    )))
                }
            };
        }
        cfg.bank = bank_overrides(&cfg.bank, &bank_table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_mc == 0 {
            return Err(Error::Config("n_mc must be at least 1".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("no variants requested".into()));
        }
        self.scenario.validate()
    }
}

fn bank_overrides(bank: &BankConfig, table: &toml::Table) -> Result<BankConfig> {
    let mut b = bank.clone();
    let int = |key: &str, v: &toml::Value| -> Result<usize> {
        match v {
            toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            other => Err(Error::Config(format!(
                "{key} must be a non-negative integer, got {other}"
            ))),
        }
    };
    let float = |key: &str, v: &toml::Value| -> Result<f64> {
        match v {
            toml::Value::Integer(i) => Ok(*i as f64),
            toml::Value::Float(f) => Ok(*f),
            other => Err(Error::Config(format!(
                "{key} must be a number, got {other}"
            ))),
        }
    };
    for (key, v) in table {
        match key.as_str() {
            "dft_len" => b.dft_len = int(key, v)?,
            "dft_channels" => b.dft_channels = int(key, v)?,
            "kaiser_width_factor" => b.kaiser_width_factor = float(key, v)?,
            "point_taps" => b.point_taps = int(key, v)?,
            "point_bins" => b.point_bins = int(key, v)?,
            "point_stopband_zeros" => {
                b.point_stopband_zeros = v.as_bool().ok_or_else(|| {
                    Error::Config(format!("point_stopband_zeros must be a boolean, got {v}"))
                })?
            }
            "derivative_taps" => b.derivative_taps = int(key, v)?,
            "dc_order" => b.dc_order = int(key, v)?,
            "nyquist_order" => b.nyquist_order = int(key, v)?,
            "relative_loading" => b.relative_loading = float(key, v)?,
            other => return Err(Error::Config(format!("unknown parameter '{other}'"))),
        }
    }
    Ok(b)
}

/// Score of one variant on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantOutcome {
    pub kind: BeamformerKind,
    pub snr_db: f64,
    pub group_delay: f64,
    /// Design noise power `h^H R h`.
    pub power: f64,
    pub constraint_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceResult {
    pub index: usize,
    pub look_direction: f64,
    pub outcomes: Vec<VariantOutcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub kind: BeamformerKind,
    pub mean_snr_db: f64,
    pub se_snr_db: f64,
    pub mean_group_delay: f64,
    pub se_group_delay: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub scenario: ScenarioKind,
    pub rows: Vec<VariantSummary>,
    pub n_mc: usize,
    /// `(instance, error)` for every aborted instance.
    pub failures: Vec<(usize, String)>,
    pub wall_clock_s: f64,
    pub instances: Vec<InstanceResult>,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl ResultTable {
    /// Averages per variant over successful instances, SNR averaged in dB.
    pub fn from_instances(
        scenario: ScenarioKind,
        variants: &[BeamformerKind],
        n_mc: usize,
        instances: Vec<InstanceResult>,
        failures: Vec<(usize, String)>,
        wall_clock_s: f64,
    ) -> Self {
        let rows = variants
            .iter()
            .map(|&kind| {
                let picked: Vec<&VariantOutcome> = instances
                    .iter()
                    .flat_map(|i| i.outcomes.iter().filter(move |o| o.kind == kind))
                    .collect();
                let snr: Vec<f64> = picked.iter().map(|o| o.snr_db).collect();
                let q: Vec<f64> = picked.iter().map(|o| o.group_delay).collect();
                let (mean_snr_db, se_snr_db) = mean_and_se(&snr);
                let (mean_group_delay, se_group_delay) = mean_and_se(&q);
                VariantSummary {
                    kind,
                    mean_snr_db,
                    se_snr_db,
                    mean_group_delay,
                    se_group_delay,
                    count: picked.len(),
                }
            })
            .collect();
        Self {
            scenario,
            rows,
            n_mc,
            failures,
            wall_clock_s,
            instances,
        }
    }

    pub fn row(&self, kind: BeamformerKind) -> Option<&VariantSummary> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Filters and processing constants shared by every instance.
pub struct Pipeline {
    pub scenario: ScenarioConfig,
    pub filters: ScenarioFilters,
    pub fractional: FractionalDelay,
    pub bank: BankConfig,
    pub variants: Vec<BeamformerKind>,
    pub seed: u64,
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            scenario: cfg.scenario.clone(),
            filters: ScenarioFilters::design(&cfg.scenario)?,
            fractional: FractionalDelay::from_config(&cfg.scenario)?,
            bank: cfg.bank.clone(),
            variants: cfg.variants.clone(),
            seed: cfg.seed,
        })
    }

    /// Draw instance `index` of the campaign.
    pub fn instance(&self, index: usize) -> Result<ScenarioInstance> {
        let mut rng = instance_rng(self.seed, index as u64);
        sample_scenario(&mut rng, &self.scenario, &self.filters)
    }

    /// Design every variant on the instance's survey.
    pub fn design(&self, inst: &ScenarioInstance) -> Result<Vec<DesignReport>> {
        let inputs = DesignInputs {
            survey: &inst.survey,
            look_direction: inst.look_direction,
            array: self.scenario.array()?,
            sample_rate: self.scenario.f_smp,
        };
        design_bank(&inputs, &self.variants, &self.bank)
            .into_iter()
            .collect()
    }

    /// Full chain for one instance.
    pub fn run_instance(&self, index: usize) -> Result<InstanceResult> {
        let inst = self.instance(index)?;
        let reports = self.design(&inst)?;
        let snr = match inst.kind {
            ScenarioKind::Comm => self.score_comm(&inst, &reports)?,
            ScenarioKind::Radar => self.score_radar(&inst, &reports)?,
        };
        let outcomes = reports
            .iter()
            .zip(snr)
            .map(|(r, snr_db)| VariantOutcome {
                kind: r.kind,
                snr_db,
                group_delay: r.group_delay,
                power: r.power,
                constraint_residual: r.constraint_residual,
            })
            .collect();
        Ok(InstanceResult {
            index,
            look_direction: inst.look_direction,
            outcomes,
        })
    }

    fn score_comm(&self, inst: &ScenarioInstance, reports: &[DesignReport]) -> Result<Vec<f64>> {
        reports
            .iter()
            .map(|r| {
                let y = apply(&r.weights, &inst.data)?;
                let first = r.weights.grid().taps - 1;
                let delay = self.scenario.receiver_delay() + r.group_delay;
                Ok(comm_snr(&y, first, &inst.transmitted, delay, &self.fractional)?.snr_db)
            })
            .collect()
    }

    /// Each output is advanced by its group delay so one reference, delayed by
    /// the receiver filter only, serves every variant.
    fn score_radar(&self, inst: &ScenarioInstance, reports: &[DesignReport]) -> Result<Vec<f64>> {
        let grid = RangeDopplerGrid::from_config(&self.scenario)?;
        let reference = LaggedReference::from_waveform(
            &inst.transmitted,
            self.scenario.receiver_delay(),
            grid.dwell * RADAR_DOWNSAMPLE,
            RADAR_DOWNSAMPLE,
            grid.range_cells,
            &self.fractional,
        )?;
        let suppressor =
            ZeroDopplerSuppressor::new(reference.clone(), grid.dwell, grid.range_cells)?;
        reports
            .iter()
            .map(|r| {
                let y = apply_aligned(&r.weights, &inst.data)?;
                let y = delay_signal(&y, -r.group_delay, &self.fractional)?;
                let mut y_ds = downsample(&y, RADAR_DOWNSAMPLE);
                y_ds.truncate(grid.dwell);
                let residual = suppressor.suppress(&y_ds)?;
                let map = range_doppler_map(&residual, &reference, &grid)?;
                Ok(radar_snr(&map, &inst.scatterers, DEFAULT_GUARD)?.snr_db)
            })
            .collect()
    }
}

/// Run the campaign, logging and counting failed instances.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let start = Instant::now();
    let pipeline = Pipeline::new(cfg)?;
    let results: Vec<Result<InstanceResult>> = (0..cfg.n_mc)
        .into_par_iter()
        .map(|i| pipeline.run_instance(i))
        .collect();
    let mut instances = Vec::with_capacity(cfg.n_mc);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(inst) => instances.push(inst),
            Err(e) => {
                log::warn!("instance {i} failed: {e}");
                failures.push((i, e.to_string()));
            }
        }
    }
    Ok(ResultTable::from_instances(
        cfg.scenario.scenario,
        &cfg.variants,
        cfg.n_mc,
        instances,
        failures,
        start.elapsed().as_secs_f64(),
    ))
}

/// `P(q)` of the derivative-constrained design on a uniform grid, with the E and F selections.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayCurve {
    pub points: Vec<(f64, f64)>,
    pub min_power: DelaySelection,
    pub min_latency: DelaySelection,
}

pub fn sweep_delay_curve(
    inst: &ScenarioInstance,
    scenario: &ScenarioConfig,
    bank: &BankConfig,
) -> Result<DelayCurve> {
    let taps = bank.derivative_taps;
    let r = estimate_covariance(&inst.survey, taps, bank.relative_loading)?;
    let array = scenario.array()?;
    let spec =
        DerivativeConstraintSpec::new(bank.dc_order, bank.nyquist_order, inst.look_direction, 0.0)?;
    let sys = derivative_system(&spec, r.grid(), array.spatial_frequency())?;
    let a = dual_gram(&r, &sys.matrix)?;
    let poly = power_polynomial(&a, bank.dc_order, bank.nyquist_order)?;
    let steps = ((taps as f64 - 1.0) / DELAY_CURVE_STEP).round() as usize;
    let points = (0..=steps)
        .map(|i| {
            let q = i as f64 * DELAY_CURVE_STEP;
            Ok((
                q,
                noise_power_dual(&build_d(&spec.with_group_delay(q)), &a)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DelayCurve {
        points,
        min_power: minimize_power_delay(&poly, taps)?,
        min_latency: minimize_latency_delay(&poly, taps)?,
    })
}

/// Angles -90..90 degrees in half-degree steps.
pub fn response_angles() -> Vec<f64> {
    (0..=360)
        .map(|i| (-90.0 + 0.5 * i as f64).to_radians())
        .collect()
}

/// Frequencies -pi..pi in steps of pi/256.
pub fn response_frequencies() -> Vec<f64> {
    (0..=512)
        .map(|i| std::f64::consts::PI * (i as f64 - 256.0) / 256.0)
        .collect()
}

/// Magnitude response of a design on the standard export grid.
pub fn export_response(report: &DesignReport, omega_s: f64) -> Result<ResponseGrid> {
    response_grid(
        &report.weights,
        &response_frequencies(),
        &response_angles(),
        omega_s,
        RESPONSE_FLOOR_DB,
    )
}
