//! Tapped-delay-line multipath channels.
//!
//! The tone-domain path (`freq_response`, `propagate_tones`) uses exact tap
//! delays. The sample-domain path (`propagate_samples`) shifts each tap by an
//! integer number of samples chosen by a [`DelayPolicy`] and rotates it by
//! `exp(−j2π·f_ref·τ)` with the exact delay `τ`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{cis_cycles, lit, Real};
use crate::signal::{BasebandSignal, MultisineWeights, ToneGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("channel needs at least one tap")]
    NoTaps,
    #[error("tap delays must be non-negative and strictly increasing (tap {index})")]
    BadDelay { index: usize },
    #[error("tap delay {delay} s is not an integer number of samples at {sample_rate} Hz")]
    DelayNotRepresentable { delay: f64, sample_rate: f64 },
    #[error("noise power must be non-negative (got {0})")]
    NegativeNoise(f64),
    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    Los,
    Nlos,
}

impl ChannelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelKind::Los => "los",
            ChannelKind::Nlos => "nlos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap<T> {
    pub delay: T,
    pub gain: Complex<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TapDelayChannel<T> {
    taps: Vec<Tap<T>>,
    label: Option<ChannelKind>,
}

impl<T: Real> TapDelayChannel<T> {
    pub fn new(taps: Vec<Tap<T>>) -> Result<Self, ChannelError> {
        if taps.is_empty() {
            return Err(ChannelError::NoTaps);
        }
        for (index, tap) in taps.iter().enumerate() {
            let ordered = index == 0 || tap.delay > taps[index - 1].delay;
            if !(tap.delay >= T::zero()) || !tap.delay.is_finite() || !ordered {
                return Err(ChannelError::BadDelay { index });
            }
        }
        Ok(Self { taps, label: None })
    }

    /// Single zero-delay unit tap.
    pub fn identity() -> Self {
        Self {
            taps: vec![Tap {
                delay: T::zero(),
                gain: Complex::new(T::one(), T::zero()),
            }],
            label: Some(ChannelKind::Los),
        }
    }

    pub fn with_label(mut self, label: ChannelKind) -> Self {
        self.label = Some(label);
        self
    }

    pub fn taps(&self) -> &[Tap<T>] {
        &self.taps
    }

    pub fn label(&self) -> Option<ChannelKind> {
        self.label
    }

    /// Largest tap delay.
    pub fn max_delay(&self) -> T {
        self.taps.last().map(|t| t.delay).unwrap_or_else(T::zero)
    }

    /// `Σ|gain|²`.
    pub fn total_power(&self) -> T {
        self.taps.iter().fold(T::zero(), |acc, t| acc + t.gain.norm_sqr())
    }
}

/// `h(f) = Σ_l gain_l·exp(−j2π f·delay_l)`.
pub fn freq_response<T: Real>(ch: &TapDelayChannel<T>, f: T) -> Complex<T> {
    ch.taps
        .iter()
        .fold(Complex::new(T::zero(), T::zero()), |acc, tap| {
            acc + tap.gain * cis_cycles(-(f * tap.delay))
        })
}

/// Tone weights after the channel: `r_n = h(f_n)·ω_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedTones<T> {
    pub grid: ToneGrid<T>,
    pub rx_weights: Vec<Complex<T>>,
}

impl<T: Real> ReceivedTones<T> {
    /// Received RF power, `½·Σ|r_n|²`.
    pub fn power(&self) -> T {
        crate::signal::tone_power(&self.rx_weights)
    }
}

pub fn propagate_tones<T: Real>(w: &MultisineWeights<T>, ch: &TapDelayChannel<T>) -> ReceivedTones<T> {
    let grid = w.grid().clone();
    let rx_weights = w
        .weights()
        .iter()
        .enumerate()
        .map(|(n, wn)| freq_response(ch, grid.tone_freq(n)) * wn)
        .collect();
    ReceivedTones { grid, rx_weights }
}

/// How tap delays map onto the sample grid in [`propagate_samples`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DelayPolicy {
    /// Round every delay to the nearest sample.
    #[default]
    Nearest,
    /// Reject delays further than `tolerance` samples from an integer.
    Exact { tolerance: f64 },
}

/// Convolves a baseband signal with the sample-quantized channel. The output
/// has the input's length; samples before the first arrival read as zero.
pub fn propagate_samples<T: Real>(
    sig: &BasebandSignal<T>,
    ch: &TapDelayChannel<T>,
    policy: DelayPolicy,
) -> Result<BasebandSignal<T>, ChannelError> {
    let mut shifted = Vec::with_capacity(ch.taps.len());
    for tap in &ch.taps {
        let position = tap.delay * sig.sample_rate;
        let nearest = position.round();
        if let DelayPolicy::Exact { tolerance } = policy {
            if (position - nearest).abs() > lit(tolerance) {
                return Err(ChannelError::DelayNotRepresentable {
                    delay: tap.delay.to_f64().unwrap_or(f64::NAN),
                    sample_rate: sig.sample_rate.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let lag = nearest.to_usize().unwrap_or(usize::MAX);
        let gain = tap.gain * cis_cycles(-(sig.reference_freq * tap.delay));
        shifted.push((lag, gain));
    }

    let mut samples = vec![Complex::new(T::zero(), T::zero()); sig.samples.len()];
    for (lag, gain) in shifted {
        if lag >= samples.len() {
            continue;
        }
        for (out, x) in samples[lag..].iter_mut().zip(&sig.samples) {
            *out = *out + gain * x;
        }
    }
    Ok(BasebandSignal {
        samples,
        ..sig.clone()
    })
}

/// Adds circularly-symmetric complex Gaussian noise with per-sample variance
/// `noise_power`. Deterministic for a given seed.
pub fn add_awgn<T: Real>(
    sig: &BasebandSignal<T>,
    noise_power: T,
    rng_seed: u64,
) -> Result<BasebandSignal<T>, ChannelError> {
    if !(noise_power >= T::zero()) {
        return Err(ChannelError::NegativeNoise(noise_power.to_f64().unwrap_or(f64::NAN)));
    }
    if noise_power == T::zero() {
        return Ok(sig.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let sigma = (noise_power / lit(2.0)).sqrt();
    let samples = sig
        .samples
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex::new(lit::<T>(re), lit::<T>(im)).scale(sigma)
        })
        .collect();
    Ok(BasebandSignal {
        samples,
        ..sig.clone()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ProfileKind {
    /// One tap with fixed magnitude and uniformly random phase.
    Flat,
    /// `tap_count` taps at multiples of `tap_spacing` seconds with expected
    /// power proportional to `exp(−delay / rms_delay_spread)`.
    Exponential {
        tap_count: usize,
        rms_delay_spread: f64,
        tap_spacing: f64,
    },
}

/// Statistical description of a channel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    /// Expected `Σ|gain|²` expressed as a loss in dB.
    pub mean_path_loss_db: f64,
}

impl ChannelProfile {
    /// Single-tap line-of-sight profile, 55 dB loss.
    pub fn los() -> Self {
        Self {
            kind: ProfileKind::Flat,
            mean_path_loss_db: 55.0,
        }
    }

    /// 8 taps, 50 ns apart, 25 ns decay constant, 60 dB loss.
    pub fn nlos() -> Self {
        Self {
            kind: ProfileKind::Exponential {
                tap_count: 8,
                rms_delay_spread: 25e-9,
                tap_spacing: 50e-9,
            },
            mean_path_loss_db: 60.0,
        }
    }

    pub fn label(&self) -> ChannelKind {
        match self.kind {
            ProfileKind::Flat => ChannelKind::Los,
            ProfileKind::Exponential { .. } => ChannelKind::Nlos,
        }
    }

    /// Linear mean power gain, `10^(−loss/10)`.
    pub fn mean_power_gain(&self) -> f64 {
        10f64.powf(-self.mean_path_loss_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !self.mean_path_loss_db.is_finite() {
            return Err(ChannelError::InvalidProfile("path loss must be finite".into()));
        }
        if let ProfileKind::Exponential {
            tap_count,
            rms_delay_spread,
            tap_spacing,
        } = self.kind
        {
            if tap_count == 0 {
                return Err(ChannelError::InvalidProfile("tap_count must be at least 1".into()));
            }
            if !(rms_delay_spread >= 0.0) || !rms_delay_spread.is_finite() {
                return Err(ChannelError::InvalidProfile(
                    "rms_delay_spread must be non-negative".into(),
                ));
            }
            if !(tap_spacing > 0.0) || !tap_spacing.is_finite() {
                return Err(ChannelError::InvalidProfile("tap_spacing must be positive".into()));
            }
        }
        Ok(())
    }

    /// Expected per-tap powers, summing to the mean power gain.
    pub fn tap_powers(&self) -> Vec<(f64, f64)> {
        let total = self.mean_power_gain();
        match self.kind {
            ProfileKind::Flat => vec![(0.0, total)],
            ProfileKind::Exponential {
                tap_count,
                rms_delay_spread,
                tap_spacing,
            } => {
                if rms_delay_spread == 0.0 {
                    return vec![(0.0, total)];
                }
                let raw: Vec<(f64, f64)> = (0..tap_count)
                    .map(|l| {
                        let delay = l as f64 * tap_spacing;
                        (delay, (-delay / rms_delay_spread).exp())
                    })
                    .collect();
                let norm: f64 = raw.iter().map(|(_, p)| p).sum();
                raw.into_iter().map(|(d, p)| (d, total * p / norm)).collect()
            }
        }
    }
}

/// Draws one channel realization from a profile.
pub fn sample_random_channel<T: Real>(
    profile: &ChannelProfile,
    rng_seed: u64,
) -> Result<TapDelayChannel<T>, ChannelError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let taps = match profile.kind {
        ProfileKind::Flat => {
            let phase: f64 = Uniform::new(0.0, 1.0)
                .expect("unit interval")
                .sample(&mut rng);
            let magnitude = profile.mean_power_gain().sqrt();
            vec![Tap {
                delay: T::zero(),
                gain: cis_cycles(lit::<T>(phase)).scale(lit(magnitude)),
            }]
        }
        ProfileKind::Exponential { .. } => profile
            .tap_powers()
            .into_iter()
            .map(|(delay, power)| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let sigma = (power / 2.0).sqrt();
                Tap {
                    delay: lit(delay),
                    gain: Complex::new(lit(re * sigma), lit(im * sigma)),
                }
            })
            .collect(),
    };
    Ok(TapDelayChannel::new(taps)?.with_label(profile.label()))
}
