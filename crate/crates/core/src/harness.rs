//! Closed-loop slot simulation and Monte-Carlo experiments.
//!
//! One slot runs the full loop: OFDM pilot frame → channel → noise → LS
//! estimate → tone CSI → SMF weights → tone-domain propagation → polynomial
//! harvesting. A non-adaptive arm with uniform zero-phase weights shares the
//! channel realization and transmit power.

use std::io::Write;
use std::path::Path;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chanest::{
    build_pilot_frame, extract_tone_csi, ls_estimate, ChanestError, OfdmConfig, PilotGrid,
};
use crate::channel::{
    add_awgn, freq_response, propagate_samples, propagate_tones, sample_random_channel,
    ChannelError, ChannelKind, ChannelProfile, DelayPolicy, Tap, TapDelayChannel,
};
use crate::optimizer::{nonadaptive_weights, smf_weights, OptimizerError, SmfParams};
use crate::rectenna::{
    harvest_dc_efficiency_curve, harvest_dc_polynomial, EfficiencyCurve, PolynomialModel,
    RectennaError, RectennaModel,
};
use crate::scalar::{dbm_to_watts, watts_to_dbm};
use crate::signal::{SignalError, ToneGrid};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Chanest(#[from] ChanestError),
    #[error(transparent)]
    Rectenna(#[from] RectennaError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SlotError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Chanest(#[from] ChanestError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Rectenna(#[from] RectennaError),
}

/// Split of a slot into channel estimation and power transfer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotSchedule {
    pub t_ce: f64,
    pub t_pt: f64,
    pub slot_length: f64,
}

impl SlotSchedule {
    pub fn new(t_ce: f64, t_pt: f64, slot_length: f64) -> Result<Self, ScenarioError> {
        let s = Self { t_ce, t_pt, slot_length };
        if !(t_ce > 0.0 && t_pt >= 0.0 && slot_length > 0.0) || t_ce + t_pt > slot_length * (1.0 + 1e-12) {
            return Err(ScenarioError::Invalid(format!(
                "schedule needs t_ce > 0, t_pt >= 0 and t_ce + t_pt <= slot_length (got {t_ce}, {t_pt}, {slot_length})"
            )));
        }
        Ok(s)
    }

    /// Power transfer fills the rest of the slot.
    pub fn filling(t_ce: f64, slot_length: f64) -> Result<Self, ScenarioError> {
        Self::new(t_ce, slot_length - t_ce, slot_length)
    }

    /// Fraction of the slot spent transferring power.
    pub fn duty_cycle(&self) -> f64 {
        self.t_pt / self.slot_length
    }
}

impl Default for SlotSchedule {
    /// 1 ms estimation, 999 ms power transfer, 1 s slot.
    fn default() -> Self {
        Self {
            t_ce: 1e-3,
            t_pt: 0.999,
            slot_length: 1.0,
        }
    }
}

/// Channel source for a scenario: a random profile or fixed taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSpec {
    Profile(ChannelProfile),
    Taps { taps: Vec<TapSpec> },
}

/// Fixed tap as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapSpec {
    pub delay: f64,
    pub re: f64,
    pub im: f64,
}

impl ChannelSpec {
    fn kind(&self) -> ChannelKind {
        match self {
            ChannelSpec::Profile(p) => p.label(),
            ChannelSpec::Taps { taps } if taps.len() == 1 => ChannelKind::Los,
            ChannelSpec::Taps { .. } => ChannelKind::Nlos,
        }
    }

    fn fixed(&self) -> Result<Option<TapDelayChannel<f64>>, ChannelError> {
        match self {
            ChannelSpec::Profile(p) => {
                p.validate()?;
                Ok(None)
            }
            ChannelSpec::Taps { taps } => {
                let taps = taps
                    .iter()
                    .map(|t| Tap {
                        delay: t.delay,
                        gain: Complex::new(t.re, t.im),
                    })
                    .collect();
                Ok(Some(TapDelayChannel::new(taps)?.with_label(self.kind())))
            }
        }
    }
}

/// WPT tone grid as written in scenario files; centered on the OFDM carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TonesSpec {
    pub count: usize,
    pub spacing: f64,
}

impl Default for TonesSpec {
    fn default() -> Self {
        Self {
            count: 8,
            spacing: 1.25e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSpec {
    pub beta: f64,
    pub transmit_power_dbm: f64,
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        Self {
            beta: 3.0,
            transmit_power_dbm: 35.0,
        }
    }
}

/// Rectenna settings: polynomial coefficients for the waveform comparison and
/// an efficiency curve for dimensional DC estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RectennaSpec {
    pub k2: f64,
    pub k4: f64,
    pub antenna_impedance: f64,
    /// `[dBm, efficiency]` pairs.
    pub curve: Vec<[f64; 2]>,
}

impl Default for RectennaSpec {
    fn default() -> Self {
        let poly = PolynomialModel::<f64>::default();
        Self {
            k2: poly.k2,
            k4: poly.k4,
            antenna_impedance: poly.antenna_impedance,
            curve: EfficiencyCurve::<f64>::prototype()
                .breakpoints()
                .iter()
                .map(|&(d, e)| [d, e])
                .collect(),
        }
    }
}

/// A complete experiment definition. Every field has a default; see the
/// README for the file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    /// Per-sample complex noise variance at the estimator input, in dBm.
    /// `None` or `-inf` gives noiseless (perfect) estimation.
    pub noise_power_dbm: Option<f64>,
    pub delay_policy: DelayPolicy,
    pub channel: ChannelSpec,
    pub ofdm: OfdmConfig,
    pub tones: TonesSpec,
    pub optimizer: OptimizerSpec,
    pub rectenna: RectennaSpec,
    pub schedule: SlotSchedule,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::nlos()
    }
}

impl Scenario {
    /// Frequency-selective office-like scenario with thermal-level noise.
    pub fn nlos() -> Self {
        Self {
            name: "nlos".into(),
            trials: 10,
            seed: 1,
            noise_power_dbm: Some(-91.0),
            delay_policy: DelayPolicy::Nearest,
            channel: ChannelSpec::Profile(ChannelProfile::nlos()),
            ofdm: OfdmConfig::default(),
            tones: TonesSpec::default(),
            optimizer: OptimizerSpec::default(),
            rectenna: RectennaSpec::default(),
            schedule: SlotSchedule::default(),
        }
    }

    /// Single-tap line-of-sight scenario.
    pub fn los() -> Self {
        Self {
            name: "los".into(),
            channel: ChannelSpec::Profile(ChannelProfile::los()),
            ..Self::nlos()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "nlos" => Some(Self::nlos()),
            "los" => Some(Self::los()),
            _ => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn transmit_power(&self) -> f64 {
        dbm_to_watts(self.optimizer.transmit_power_dbm)
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power_dbm.map_or(0.0, dbm_to_watts)
    }

    pub fn tone_grid(&self) -> Result<ToneGrid<f64>, ScenarioError> {
        Ok(ToneGrid::new(
            self.ofdm.center_freq,
            self.tones.count,
            self.tones.spacing,
            self.ofdm.active_band,
        )?)
    }

    pub fn polynomial_model(&self) -> Result<RectennaModel<f64>, ScenarioError> {
        let r = &self.rectenna;
        Ok(RectennaModel::Polynomial(PolynomialModel::new(
            r.k2,
            r.k4,
            r.antenna_impedance,
        )?))
    }

    pub fn curve_model(&self) -> Result<RectennaModel<f64>, ScenarioError> {
        let points = self.rectenna.curve.iter().map(|p| (p[0], p[1])).collect();
        Ok(RectennaModel::EfficiencyCurve(EfficiencyCurve::new(points)?))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.trials == 0 {
            return Err(ScenarioError::Invalid("trials must be at least 1".into()));
        }
        self.ofdm.validate()?;
        let grid = self.tone_grid()?;
        // Every tone must fall on an active subcarrier.
        let df = self.ofdm.subcarrier_spacing();
        let half = (self.ofdm.active_count() / 2) as f64;
        for n in 0..grid.tone_count() {
            let bin = grid.tone_offset(n) / df;
            if (bin - bin.round()).abs() > 1e-9 || bin.round() < -half || bin.round() >= half {
                return Err(ScenarioError::Invalid(format!(
                    "tone {n} at offset {} Hz is not on an active subcarrier",
                    grid.tone_offset(n)
                )));
            }
        }
        SmfParams::new(self.optimizer.beta, self.transmit_power())?;
        self.polynomial_model()?;
        self.curve_model()?;
        self.channel.fixed()?;
        let s = self.schedule;
        SlotSchedule::new(s.t_ce, s.t_pt, s.slot_length)?;
        if s.t_ce < self.ofdm.frame_duration() * (1.0 - 1e-12) {
            return Err(ScenarioError::Invalid(format!(
                "t_ce {} s is shorter than the pilot frame ({} s)",
                s.t_ce,
                self.ofdm.frame_duration()
            )));
        }
        if let Some(dbm) = self.noise_power_dbm {
            // -inf is the file-level spelling of "no noise".
            if dbm.is_nan() || dbm == f64::INFINITY {
                return Err(ScenarioError::Invalid("noise_power_dbm must be finite or -inf".into()));
            }
        }
        Ok(())
    }

    /// Channel used by trial `trial`: the fixed taps, or a fresh draw.
    pub fn channel_for_trial(&self, trial: usize) -> Result<TapDelayChannel<f64>, ChannelError> {
        match self.channel.fixed()? {
            Some(ch) => Ok(ch),
            None => match &self.channel {
                ChannelSpec::Profile(p) => sample_random_channel(p, channel_seed(self.trial_seed(trial))),
                ChannelSpec::Taps { .. } => unreachable!("fixed taps handled above"),
            },
        }
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        splitmix64(self.seed ^ splitmix64(trial as u64))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn channel_seed(trial_seed: u64) -> u64 {
    splitmix64(trial_seed ^ 0xC4A1)
}

fn noise_seed(trial_seed: u64) -> u64 {
    splitmix64(trial_seed ^ 0x7015E)
}

/// Outcome of one adaptive/non-adaptive slot pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotReport {
    pub channel_kind: Option<ChannelKind>,
    pub csi_true: Vec<Complex<f64>>,
    pub csi_est: Vec<Complex<f64>>,
    pub weights_adaptive: Vec<Complex<f64>>,
    pub weights_nonadaptive: Vec<Complex<f64>>,
    pub rx_rf_power_adaptive: f64,
    pub rx_rf_power_nonadaptive: f64,
    pub dc_adaptive: f64,
    pub dc_nonadaptive: f64,
    pub duty_cycled_dc_adaptive: f64,
    pub duty_cycled_dc_nonadaptive: f64,
    /// Efficiency-curve DC (W), from received RF power only.
    pub curve_dc_adaptive: f64,
    pub curve_dc_nonadaptive: f64,
    pub schedule: SlotSchedule,
}

impl SlotReport {
    /// `(dc_adaptive / dc_nonadaptive − 1)·100`.
    pub fn gain_percent(&self) -> f64 {
        (self.dc_adaptive / self.dc_nonadaptive - 1.0) * 100.0
    }

    /// Mean squared CSI error over the tones.
    pub fn csi_mse(&self) -> f64 {
        let n = self.csi_true.len().max(1) as f64;
        self.csi_true
            .iter()
            .zip(&self.csi_est)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / n
    }
}

/// Runs one closed-loop slot on channel `ch`.
pub fn run_slot(sc: &Scenario, ch: &TapDelayChannel<f64>, rng_seed: u64) -> Result<SlotReport, SlotError> {
    let grid = sc.tone_grid().map_err(slot_from_scenario)?;
    let poly = sc.polynomial_model().map_err(slot_from_scenario)?;
    let curve = sc.curve_model().map_err(slot_from_scenario)?;
    let power = sc.transmit_power();

    // Pilot frame at the same average power as the power waveform. The
    // receiver shares the transmitter's clock and gain, so it removes the
    // known gain before estimation.
    let pilots = PilotGrid::<f64>::all_ones(&sc.ofdm);
    let frame = build_pilot_frame::<f64>(&sc.ofdm, &pilots)?;
    let tx_gain = (power / frame.mean_power()?).sqrt();
    let received = propagate_samples(&frame.scaled(tx_gain), ch, sc.delay_policy)?;
    let received = add_awgn(&received, sc.noise_power(), rng_seed)?;
    let est = ls_estimate(&received.scaled(1.0 / tx_gain), &sc.ofdm, &pilots)?;
    let csi_est = extract_tone_csi(&est, &grid)?;
    let csi_true: Vec<_> = grid.tone_freqs().iter().map(|&f| freq_response(ch, f)).collect();

    let adaptive = smf_weights(&csi_est, &SmfParams::new(sc.optimizer.beta, power)?, &grid)?;
    let baseline = nonadaptive_weights(&grid, power)?;
    let rx_a = propagate_tones(&adaptive, ch);
    let rx_n = propagate_tones(&baseline, ch);
    let dc_adaptive = harvest_dc_polynomial(&rx_a, &poly)?;
    let dc_nonadaptive = harvest_dc_polynomial(&rx_n, &poly)?;
    let duty = sc.schedule.duty_cycle();

    Ok(SlotReport {
        channel_kind: ch.label(),
        csi_true,
        csi_est,
        weights_adaptive: adaptive.weights().to_vec(),
        weights_nonadaptive: baseline.weights().to_vec(),
        rx_rf_power_adaptive: rx_a.power(),
        rx_rf_power_nonadaptive: rx_n.power(),
        dc_adaptive,
        dc_nonadaptive,
        duty_cycled_dc_adaptive: dc_adaptive * duty,
        duty_cycled_dc_nonadaptive: dc_nonadaptive * duty,
        curve_dc_adaptive: harvest_dc_efficiency_curve(rx_a.power(), &curve)?,
        curve_dc_nonadaptive: harvest_dc_efficiency_curve(rx_n.power(), &curve)?,
        schedule: sc.schedule,
    })
}

fn slot_from_scenario(e: ScenarioError) -> SlotError {
    match e {
        ScenarioError::Signal(e) => SlotError::Signal(e),
        ScenarioError::Channel(e) => SlotError::Channel(e),
        ScenarioError::Chanest(e) => SlotError::Chanest(e),
        ScenarioError::Rectenna(e) => SlotError::Rectenna(e),
        ScenarioError::Optimizer(e) => SlotError::Optimizer(e),
        other => SlotError::Chanest(ChanestError::InvalidConfig(other.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub outcome: Result<SlotReport, SlotError>,
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub mean: f64,
    pub stddev: f64,
}

impl Stats {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        if n == 0 {
            return Self::default();
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            stddev: var.sqrt(),
        }
    }
}

/// Aggregate of an experiment, trials in ascending `trial_id` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSummary {
    pub scenario: String,
    pub trials: Vec<TrialRecord>,
    pub dc_adaptive: Stats,
    pub dc_nonadaptive: Stats,
    pub duty_cycled_dc_adaptive: Stats,
    pub duty_cycled_dc_nonadaptive: Stats,
    pub curve_dc_adaptive: Stats,
    pub curve_dc_nonadaptive: Stats,
    /// `(mean_adaptive / mean_nonadaptive − 1)·100`.
    pub mean_gain_percent: f64,
    /// Fraction of successful trials where the adaptive arm harvested at
    /// least as much as the baseline.
    pub adaptive_win_rate: f64,
}

impl ExperimentSummary {
    pub fn from_trials(scenario: impl Into<String>, mut trials: Vec<TrialRecord>) -> Self {
        trials.sort_by_key(|t| t.trial_id);
        let ok: Vec<&SlotReport> = trials.iter().filter_map(|t| t.outcome.as_ref().ok()).collect();
        let stat = |f: fn(&SlotReport) -> f64| Stats::of(ok.iter().map(move |r| f(r)));
        let dc_adaptive = stat(|r| r.dc_adaptive);
        let dc_nonadaptive = stat(|r| r.dc_nonadaptive);
        let wins = ok.iter().filter(|r| r.dc_adaptive >= r.dc_nonadaptive).count();
        Self {
            scenario: scenario.into(),
            mean_gain_percent: if ok.is_empty() {
                0.0
            } else {
                (dc_adaptive.mean / dc_nonadaptive.mean - 1.0) * 100.0
            },
            adaptive_win_rate: if ok.is_empty() { 0.0 } else { wins as f64 / ok.len() as f64 },
            dc_adaptive,
            dc_nonadaptive,
            duty_cycled_dc_adaptive: stat(|r| r.duty_cycled_dc_adaptive),
            duty_cycled_dc_nonadaptive: stat(|r| r.duty_cycled_dc_nonadaptive),
            curve_dc_adaptive: stat(|r| r.curve_dc_adaptive),
            curve_dc_nonadaptive: stat(|r| r.curve_dc_nonadaptive),
            trials,
        }
    }

    pub fn successes(&self) -> impl Iterator<Item = (&TrialRecord, &SlotReport)> {
        self.trials
            .iter()
            .filter_map(|t| t.outcome.as_ref().ok().map(|r| (t, r)))
    }

    pub fn failures(&self) -> impl Iterator<Item = (&TrialRecord, &SlotError)> {
        self.trials
            .iter()
            .filter_map(|t| t.outcome.as_ref().err().map(|e| (t, e)))
    }
}

/// Runs `sc.trials` independent slots in parallel with per-trial seeds.
pub fn run_experiment(sc: &Scenario) -> Result<ExperimentSummary, ScenarioError> {
    sc.validate()?;
    let trials: Vec<TrialRecord> = (0..sc.trials)
        .into_par_iter()
        .map(|trial_id| {
            let seed = sc.trial_seed(trial_id);
            let outcome = sc
                .channel_for_trial(trial_id)
                .map_err(SlotError::from)
                .and_then(|ch| run_slot(sc, &ch, noise_seed(seed)));
            TrialRecord { trial_id, seed, outcome }
        })
        .collect();
    Ok(ExperimentSummary::from_trials(sc.name.clone(), trials))
}

/// Parameters accepted by [`Scenario::with_param`].
pub const SWEEP_PARAMS: [&str; 6] = [
    "beta",
    "transmit_power_dbm",
    "noise_power_dbm",
    "rms_delay_spread",
    "mean_path_loss_db",
    "t_ce",
];

impl Scenario {
    /// Copy of the scenario with one named parameter replaced.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self, ScenarioError> {
        let mut sc = self.clone();
        match name {
            "beta" => sc.optimizer.beta = value,
            "transmit_power_dbm" => sc.optimizer.transmit_power_dbm = value,
            "noise_power_dbm" => sc.noise_power_dbm = Some(value),
            "mean_path_loss_db" => match &mut sc.channel {
                ChannelSpec::Profile(p) => p.mean_path_loss_db = value,
                ChannelSpec::Taps { .. } => {
                    return Err(ScenarioError::Invalid("fixed taps have no path loss".into()))
                }
            },
            "rms_delay_spread" => match &mut sc.channel {
                ChannelSpec::Profile(ChannelProfile {
                    kind: crate::channel::ProfileKind::Exponential { rms_delay_spread, .. },
                    ..
                }) => *rms_delay_spread = value,
                _ => {
                    return Err(ScenarioError::Invalid(
                        "rms_delay_spread needs an exponential channel profile".into(),
                    ))
                }
            },
            "t_ce" => sc.schedule = SlotSchedule::filling(value, sc.schedule.slot_length)?,
            other => {
                return Err(ScenarioError::Invalid(format!(
                    "unknown sweep parameter '{other}' (expected one of {})",
                    SWEEP_PARAMS.join(", ")
                )))
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}

/// One point of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: ExperimentSummary,
}

/// Runs the experiment once per value of `param`.
pub fn run_sweep(sc: &Scenario, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>, ScenarioError> {
    values
        .iter()
        .map(|&value| {
            Ok(SweepPoint {
                value,
                summary: run_experiment(&sc.with_param(param, value)?)?,
            })
        })
        .collect()
}

pub fn write_sweep<W: Write>(param: &str, points: &[SweepPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "param",
        "value",
        "mean_dc_adaptive",
        "mean_dc_nonadaptive",
        "gain_percent",
        "adaptive_win_rate",
        "failures",
    ])?;
    for p in points {
        let s = &p.summary;
        w.write_record([
            param.to_string(),
            p.value.to_string(),
            s.dc_adaptive.mean.to_string(),
            s.dc_nonadaptive.mean.to_string(),
            s.mean_gain_percent.to_string(),
            s.adaptive_win_rate.to_string(),
            s.failures().count().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// SMF-vs-oracle comparison over random channels at small tone counts.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub betas: Vec<f64>,
    /// Per channel: DC ratio to the oracle for each β, in `betas` order.
    pub ratios: Vec<Vec<f64>>,
}

impl OracleCheck {
    /// Per channel, the best ratio over β.
    pub fn best_ratios(&self) -> Vec<f64> {
        self.ratios
            .iter()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
            .collect()
    }

    /// Mean ratio for each β.
    pub fn mean_by_beta(&self) -> Vec<f64> {
        let n = self.ratios.len().max(1) as f64;
        (0..self.betas.len())
            .map(|i| self.ratios.iter().map(|r| r[i]).sum::<f64>() / n)
            .collect()
    }
}

/// Settings for [`oracle_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheckConfig {
    pub tones: usize,
    pub channels: usize,
    pub seed: u64,
    pub amp_levels: usize,
    pub phase_levels: usize,
    pub betas: Vec<f64>,
}

/// Draws channels from the scenario's profile, spreads `tones` tones across
/// the active band, and compares SMF at each β with the exhaustive optimum.
pub fn oracle_check(sc: &Scenario, cfg: &OracleCheckConfig) -> Result<OracleCheck, ScenarioError> {
    use crate::optimizer::{dc_through, oracle_optimal_weights, ORACLE_MAX_TONES};
    if cfg.tones == 0 || cfg.tones > ORACLE_MAX_TONES {
        return Err(ScenarioError::Invalid(format!(
            "oracle check supports 1 to {ORACLE_MAX_TONES} tones"
        )));
    }
    sc.validate()?;
    let spacing = if cfg.tones > 1 {
        sc.ofdm.active_band / (cfg.tones - 1) as f64
    } else {
        sc.ofdm.subcarrier_spacing()
    };
    let grid = ToneGrid::new(sc.ofdm.center_freq, cfg.tones, spacing, sc.ofdm.active_band)?;
    let rect = sc.polynomial_model()?;
    let power = sc.transmit_power();
    let check = Scenario { seed: cfg.seed, ..sc.clone() };
    let ratios = (0..cfg.channels)
        .map(|i| {
            let ch = check.channel_for_trial(i)?;
            let h: Vec<Complex<f64>> = grid.tone_freqs().iter().map(|&f| freq_response(&ch, f)).collect();
            let best = oracle_optimal_weights(&h, power, &grid, &rect, cfg.amp_levels, cfg.phase_levels)?;
            let best = dc_through(&best, &h, &rect)?;
            cfg.betas
                .iter()
                .map(|&beta| {
                    let w = smf_weights(&h, &SmfParams::new(beta, power)?, &grid)?;
                    Ok(dc_through(&w, &h, &rect)? / best)
                })
                .collect::<Result<Vec<f64>, ScenarioError>>()
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(OracleCheck {
        betas: cfg.betas.clone(),
        ratios,
    })
}

/// Column order of the results CSV.
pub const CSV_COLUMNS: [&str; 9] = [
    "trial_id",
    "seed",
    "channel_kind",
    "rx_rf_power_adaptive_dbm",
    "rx_rf_power_nonadaptive_dbm",
    "dc_adaptive",
    "dc_nonadaptive",
    "gain_percent",
    "csi_mse",
];

/// Writes one row per successful trial. Failed trials are omitted.
pub fn write_results<W: Write>(summary: &ExperimentSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for (t, r) in summary.successes() {
        w.write_record([
            t.trial_id.to_string(),
            t.seed.to_string(),
            r.channel_kind.map_or("unknown", |k| k.as_str()).to_string(),
            watts_to_dbm(r.rx_rf_power_adaptive).to_string(),
            watts_to_dbm(r.rx_rf_power_nonadaptive).to_string(),
            r.dc_adaptive.to_string(),
            r.dc_nonadaptive.to_string(),
            r.gain_percent().to_string(),
            r.csi_mse().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_results(summary: &ExperimentSummary, path: impl AsRef<Path>) -> csv::Result<()> {
    let file = std::fs::File::create(path)?;
    write_results(summary, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn noiseless(sc: Scenario) -> Scenario {
        Scenario { noise_power_dbm: None, ..sc }
    }

    fn fixture_channel() -> TapDelayChannel<f64> {
        TapDelayChannel::new(vec![
            Tap { delay: 0.0, gain: Complex::new(1e-3, 0.0) },
            Tap { delay: 100e-9, gain: Complex::new(-6e-4, 3e-4) },
            Tap { delay: 250e-9, gain: Complex::new(2e-4, -4e-4) },
        ])
        .unwrap()
        .with_label(ChannelKind::Nlos)
    }

    #[test]
    fn defaults_validate_and_fit_reference_regime() {
        let sc = Scenario::default();
        sc.validate().unwrap();
        assert_relative_eq!(sc.transmit_power(), 3.1623, max_relative = 1e-4);
        assert!(sc.schedule.t_ce >= sc.ofdm.frame_duration());
        let rx_dbm = 35.0 - ChannelProfile::nlos().mean_path_loss_db;
        assert!((-28.0..=-19.0).contains(&rx_dbm));
        let rx_dbm = 35.0 - ChannelProfile::los().mean_path_loss_db;
        assert!((-28.0..=-19.0).contains(&rx_dbm));
    }

    #[test]
    fn schedule_validation() {
        assert!(SlotSchedule::new(0.5, 0.6, 1.0).is_err());
        assert!(SlotSchedule::new(0.0, 0.6, 1.0).is_err());
        let s = SlotSchedule::filling(1e-3, 1.0).unwrap();
        assert_relative_eq!(s.t_pt, 0.999, max_relative = 1e-12);
        let sc = Scenario {
            schedule: SlotSchedule::new(100e-6, 0.5, 1.0).unwrap(),
            ..Scenario::default()
        };
        assert!(sc.validate().is_err());
    }

    #[test]
    fn off_grid_tones_are_rejected() {
        let mut sc = Scenario::default();
        sc.tones.spacing = 1.3e6;
        assert!(sc.validate().is_err());
        sc.tones = TonesSpec { count: 9, spacing: 1.25e6 };
        assert!(sc.validate().is_err());
    }

    #[test]
    fn identity_channel_gives_zero_gain() {
        let sc = noiseless(Scenario::los());
        let r = run_slot(&sc, &TapDelayChannel::identity(), 0).unwrap();
        for (e, t) in r.csi_est.iter().zip(&r.csi_true) {
            assert!((e - Complex::new(1.0, 0.0)).norm() < 1e-12);
            assert_eq!(*t, Complex::new(1.0, 0.0));
        }
        assert_relative_eq!(r.dc_adaptive, r.dc_nonadaptive, max_relative = 1e-9);
        assert!(r.gain_percent().abs() < 1e-7);
    }

    #[test]
    fn selective_fixture_favours_adaptive() {
        let sc = noiseless(Scenario::nlos());
        let r = run_slot(&sc, &fixture_channel(), 0).unwrap();
        assert!(r.dc_adaptive >= r.dc_nonadaptive);
        assert!(r.csi_mse() < 1e-24);
    }

    #[test]
    fn both_arms_use_the_same_power() {
        let sc = Scenario::nlos();
        let r = run_slot(&sc, &fixture_channel(), 7).unwrap();
        let p = |w: &[Complex<f64>]| w.iter().map(|x| x.norm_sqr()).sum::<f64>() / 2.0;
        assert_relative_eq!(p(&r.weights_adaptive), sc.transmit_power(), max_relative = 1e-12);
        assert_relative_eq!(p(&r.weights_nonadaptive), sc.transmit_power(), max_relative = 1e-12);
    }

    #[test]
    fn slot_is_deterministic() {
        let sc = Scenario::nlos();
        let ch = sc.channel_for_trial(3).unwrap();
        assert_eq!(run_slot(&sc, &ch, 11).unwrap(), run_slot(&sc, &ch, 11).unwrap());
    }

    #[test]
    fn zero_channel_is_a_slot_failure() {
        let sc = noiseless(Scenario::nlos());
        let dead = TapDelayChannel::new(vec![Tap { delay: 0.0, gain: Complex::new(0.0, 0.0) }]).unwrap();
        assert_eq!(
            run_slot(&sc, &dead, 0).unwrap_err(),
            SlotError::Optimizer(OptimizerError::ZeroCsi)
        );
        let sc = Scenario {
            channel: ChannelSpec::Taps { taps: vec![TapSpec { delay: 0.0, re: 0.0, im: 0.0 }] },
            trials: 2,
            ..sc
        };
        let summary = run_experiment(&sc).unwrap();
        assert_eq!(summary.failures().count(), 2);
        assert_eq!(summary.successes().count(), 0);
    }

    #[test]
    fn duty_cycle_scales_dc() {
        let ch = fixture_channel();
        let mut last = f64::INFINITY;
        let mut per_tx = None;
        for t_ce in [1e-3, 1e-2, 0.1, 0.5] {
            let sc = Scenario {
                schedule: SlotSchedule::filling(t_ce, 1.0).unwrap(),
                ..noiseless(Scenario::nlos())
            };
            let r = run_slot(&sc, &ch, 0).unwrap();
            assert_relative_eq!(r.duty_cycled_dc_adaptive, r.dc_adaptive * (1.0 - t_ce), max_relative = 1e-12);
            assert!(r.duty_cycled_dc_adaptive < last);
            last = r.duty_cycled_dc_adaptive;
            let dc = *per_tx.get_or_insert(r.dc_adaptive);
            assert_eq!(dc, r.dc_adaptive);
        }
    }

    #[test]
    fn scenario_round_trips_through_toml() {
        let sc = Scenario::nlos();
        let text = toml::to_string(&sc).unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), sc);
    }

    #[test]
    fn minimal_scenario_file_uses_defaults() {
        let sc = Scenario::from_toml_str(
            r#"
            name = "office"
            trials = 5
            [channel]
            kind = "flat"
            mean_path_loss_db = 50.0
            "#,
        )
        .unwrap();
        assert_eq!(sc.trials, 5);
        assert_eq!(sc.channel, ChannelSpec::Profile(ChannelProfile { kind: crate::channel::ProfileKind::Flat, mean_path_loss_db: 50.0 }));
        assert_eq!(sc.ofdm, OfdmConfig::default());

        let taps = Scenario::from_toml_str(
            r#"
            [channel]
            taps = [{ delay = 0.0, re = 1e-3, im = 0.0 }, { delay = 1e-7, re = 5e-4, im = 0.0 }]
            "#,
        )
        .unwrap();
        assert_eq!(taps.channel_for_trial(0).unwrap().taps().len(), 2);
        assert!(Scenario::from_toml_str("trials = 0").is_err());
        assert!(Scenario::from_toml_str("trials = \"x\"").is_err());
    }

    #[test]
    fn minus_infinity_noise_means_perfect_csi() {
        let sc = Scenario::from_toml_str("noise_power_dbm = -inf\ntrials = 2\n").unwrap();
        assert_eq!(sc.noise_power(), 0.0);
        let summary = run_experiment(&sc).unwrap();
        assert!(summary.successes().all(|(_, r)| r.csi_mse() < 1e-20));
        assert!(Scenario::from_toml_str("noise_power_dbm = nan\n").and_then(|s| s.validate()).is_err());
    }

    #[test]
    fn with_param_updates_and_validates() {
        let sc = Scenario::nlos();
        assert_eq!(sc.with_param("beta", 1.5).unwrap().optimizer.beta, 1.5);
        assert_eq!(sc.with_param("noise_power_dbm", -80.0).unwrap().noise_power_dbm, Some(-80.0));
        assert_relative_eq!(sc.with_param("t_ce", 0.1).unwrap().schedule.t_pt, 0.9, max_relative = 1e-12);
        assert!(sc.with_param("beta", -1.0).is_err());
        assert!(sc.with_param("t_ce", 1e-5).is_err());
        assert!(sc.with_param("gamma", 1.0).is_err());
        assert!(Scenario::los().with_param("rms_delay_spread", 1e-8).is_err());
        match sc.with_param("rms_delay_spread", 40e-9).unwrap().channel {
            ChannelSpec::Profile(ChannelProfile {
                kind: crate::channel::ProfileKind::Exponential { rms_delay_spread, .. },
                ..
            }) => assert_eq!(rms_delay_spread, 40e-9),
            other => panic!("unexpected channel {other:?}"),
        }
    }

    #[test]
    fn sweep_writes_one_row_per_value() {
        let sc = Scenario { trials: 3, ..Scenario::nlos() };
        let points = run_sweep(&sc, "beta", &[0.0, 3.0]).unwrap();
        let mut out = Vec::new();
        write_sweep("beta", &points, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("beta,3,"));
    }

    #[test]
    fn oracle_check_reports_ratios_at_most_one() {
        let cfg = OracleCheckConfig {
            tones: 2,
            channels: 4,
            seed: 3,
            amp_levels: 8,
            phase_levels: 8,
            betas: vec![0.0, 3.0],
        };
        let check = oracle_check(&Scenario::nlos(), &cfg).unwrap();
        assert_eq!(check.ratios.len(), 4);
        for r in check.ratios.iter().flatten() {
            assert!(*r > 0.0 && *r <= 1.0 + 1e-9, "{r}");
        }
        assert!(oracle_check(&Scenario::nlos(), &OracleCheckConfig { tones: 5, ..cfg }).is_err());
    }

    #[test]
    fn empty_summary_writes_header_only() {
        let mut out = Vec::new();
        write_results(&ExperimentSummary::default(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn single_trial_writes_one_full_row() {
        let sc = Scenario { trials: 1, ..Scenario::nlos() };
        let summary = run_experiment(&sc).unwrap();
        let mut out = Vec::new();
        write_results(&summary, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields.len(), CSV_COLUMNS.len());
        assert!(fields.iter().all(|f| !f.is_empty()));
        assert_eq!(fields[0], "0");
        assert_eq!(fields[2], "nlos");
    }
}
