//! Multisine waveforms: tone grids, complex tone weights, time-domain synthesis
//! and power accounting.
//!
//! Everything is simulated at complex baseband about a reference frequency
//! (normally the grid center). A passband waveform
//! `x(t) = Re{ Σ ω_n exp(j2π f_n t) }` is represented by its envelope
//! `e(t) = Σ ω_n exp(j2π (f_n − f_ref) t)`, so that `x(t) = Re{ e(t) exp(j2π f_ref t) }`.
//! Passband average power is `mean|e|² / 2`.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::{cis_cycles, from_usize, lit, to_db, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("tone grid is empty")]
    EmptyGrid,
    #[error("tone spacing must be positive and finite (got {0})")]
    InvalidSpacing(f64),
    #[error("tone span {span} Hz exceeds usable bandwidth {bandwidth} Hz")]
    SpanExceedsBandwidth { span: f64, bandwidth: f64 },
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights carry {power} W, above the budget of {budget} W")]
    OverBudget { power: f64, budget: f64 },
    #[error("power budget must be positive and finite (got {0})")]
    InvalidBudget(f64),
    #[error("sample rate {sample_rate} Hz aliases a tone span of {span} Hz (need at least twice the span)")]
    Aliasing { sample_rate: f64, span: f64 },
    #[error("duration must be positive and yield at least one sample")]
    InvalidDuration,
    #[error("signal has no samples")]
    EmptySignal,
}

/// Uniformly spaced tone frequencies centered on `center_freq`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneGrid<T> {
    center_freq: T,
    tone_count: usize,
    tone_spacing: T,
    usable_bandwidth: T,
}

impl<T: Real> ToneGrid<T> {
    /// Builds a grid and checks that its span fits in `usable_bandwidth`.
    pub fn new(
        center_freq: T,
        tone_count: usize,
        tone_spacing: T,
        usable_bandwidth: T,
    ) -> Result<Self, SignalError> {
        if tone_count == 0 {
            return Err(SignalError::EmptyGrid);
        }
        if !(tone_spacing > T::zero()) || !tone_spacing.is_finite() {
            return Err(SignalError::InvalidSpacing(tone_spacing.to_f64().unwrap_or(f64::NAN)));
        }
        let grid = Self {
            center_freq,
            tone_count,
            tone_spacing,
            usable_bandwidth,
        };
        if grid.span() > usable_bandwidth {
            return Err(SignalError::SpanExceedsBandwidth {
                span: grid.span().to_f64().unwrap_or(f64::NAN),
                bandwidth: usable_bandwidth.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(grid)
    }

    /// 8 tones, 1.25 MHz apart, inside 10 MHz at 2.4 GHz.
    pub fn wpt_default() -> Self {
        Self::new(lit(2.4e9), 8, lit(1.25e6), lit(10e6)).expect("default grid is valid")
    }

    pub fn center_freq(&self) -> T {
        self.center_freq
    }

    pub fn tone_count(&self) -> usize {
        self.tone_count
    }

    pub fn tone_spacing(&self) -> T {
        self.tone_spacing
    }

    pub fn usable_bandwidth(&self) -> T {
        self.usable_bandwidth
    }

    /// `(N − 1)·spacing`.
    pub fn span(&self) -> T {
        from_usize::<T>(self.tone_count - 1) * self.tone_spacing
    }

    /// Offset of tone `n` from the grid center.
    pub fn tone_offset(&self, n: usize) -> T {
        let half = from_usize::<T>(self.tone_count - 1) / lit(2.0);
        (from_usize::<T>(n) - half) * self.tone_spacing
    }

    pub fn tone_freq(&self, n: usize) -> T {
        self.center_freq + self.tone_offset(n)
    }

    pub fn tone_freqs(&self) -> Vec<T> {
        (0..self.tone_count).map(|n| self.tone_freq(n)).collect()
    }

    /// Fundamental period of any multisine on this grid.
    pub fn period(&self) -> T {
        T::one() / self.tone_spacing
    }
}

/// Complex tone weights `ω_n = s_n·exp(jφ_n)` on a grid, under a power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct MultisineWeights<T> {
    grid: ToneGrid<T>,
    weights: Vec<Complex<T>>,
    power_budget: T,
}

impl<T: Real> MultisineWeights<T> {
    pub fn new(
        grid: ToneGrid<T>,
        weights: Vec<Complex<T>>,
        power_budget: T,
    ) -> Result<Self, SignalError> {
        if weights.len() != grid.tone_count() {
            return Err(SignalError::WeightCount {
                expected: grid.tone_count(),
                got: weights.len(),
            });
        }
        if !(power_budget > T::zero()) || !power_budget.is_finite() {
            return Err(SignalError::InvalidBudget(power_budget.to_f64().unwrap_or(f64::NAN)));
        }
        let power = tone_power(&weights);
        if power > power_budget * (T::one() + lit(1e-9)) {
            return Err(SignalError::OverBudget {
                power: power.to_f64().unwrap_or(f64::NAN),
                budget: power_budget.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self {
            grid,
            weights,
            power_budget,
        })
    }

    pub fn grid(&self) -> &ToneGrid<T> {
        &self.grid
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.weights
    }

    pub fn power_budget(&self) -> T {
        self.power_budget
    }

    /// `s_n = |ω_n|`.
    pub fn amplitudes(&self) -> Vec<T> {
        self.weights.iter().map(|w| w.norm()).collect()
    }

    /// `φ_n = arg ω_n`.
    pub fn phases(&self) -> Vec<T> {
        self.weights.iter().map(|w| w.arg()).collect()
    }

    /// Multiplies every weight by `factor`, keeping grid and budget.
    pub fn rotated(&self, factor: Complex<T>) -> Result<Self, SignalError> {
        let weights = self.weights.iter().map(|w| w * factor).collect();
        Self::new(self.grid.clone(), weights, self.power_budget)
    }
}

/// Time-domain complex envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate: T,
    pub reference_freq: T,
    /// Tone spacing and span of the multisine that produced the signal, when it
    /// is one. Lets period-dependent consumers validate their input.
    pub periodicity: Option<Periodicity<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periodicity<T> {
    pub tone_spacing: T,
    pub tone_span: T,
}

impl<T: Real> BasebandSignal<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate: T, reference_freq: T) -> Self {
        Self {
            samples,
            sample_rate,
            reference_freq,
            periodicity: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> T {
        from_usize::<T>(self.samples.len()) / self.sample_rate
    }

    /// Time-average passband power, `mean|e|² / 2`.
    pub fn mean_power(&self) -> Result<T, SignalError> {
        if self.samples.is_empty() {
            return Err(SignalError::EmptySignal);
        }
        let total = self
            .samples
            .iter()
            .fold(T::zero(), |acc, s| acc + s.norm_sqr());
        Ok(total / from_usize::<T>(self.samples.len()) / lit(2.0))
    }

    /// Applies a scalar gain to every sample.
    pub fn scaled(&self, gain: T) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s.scale(gain)).collect(),
            ..self.clone()
        }
    }
}

/// `½·Σ|ω_n|²`.
pub fn tone_power<T: Real>(weights: &[Complex<T>]) -> T {
    weights.iter().fold(T::zero(), |acc, w| acc + w.norm_sqr()) / lit(2.0)
}

/// Average transmit power of a multisine, `½·Σ|ω_n|²`.
pub fn average_power<T: Real>(w: &MultisineWeights<T>) -> T {
    tone_power(&w.weights)
}

/// Samples the complex envelope of a multisine about the grid center.
pub fn synthesize_multisine<T: Real>(
    w: &MultisineWeights<T>,
    duration: T,
    sample_rate: T,
) -> Result<BasebandSignal<T>, SignalError> {
    synthesize_tones(&w.grid, &w.weights, duration, sample_rate)
}

/// Synthesis over arbitrary tone weights, without a budget check. Used for
/// received tones, whose power is set by the channel.
pub fn synthesize_tones<T: Real>(
    grid: &ToneGrid<T>,
    weights: &[Complex<T>],
    duration: T,
    sample_rate: T,
) -> Result<BasebandSignal<T>, SignalError> {
    if weights.is_empty() {
        return Err(SignalError::EmptyGrid);
    }
    if weights.len() != grid.tone_count() {
        return Err(SignalError::WeightCount {
            expected: grid.tone_count(),
            got: weights.len(),
        });
    }
    let span = grid.span();
    if !(sample_rate > T::zero()) || sample_rate < lit::<T>(2.0) * span {
        return Err(SignalError::Aliasing {
            sample_rate: sample_rate.to_f64().unwrap_or(f64::NAN),
            span: span.to_f64().unwrap_or(f64::NAN),
        });
    }
    if !(duration > T::zero()) {
        return Err(SignalError::InvalidDuration);
    }
    let count = (duration * sample_rate)
        .round()
        .to_usize()
        .ok_or(SignalError::InvalidDuration)?;
    if count == 0 {
        return Err(SignalError::InvalidDuration);
    }

    // Per-tone phase increments in cycles per sample.
    let steps: Vec<T> = (0..grid.tone_count())
        .map(|n| grid.tone_offset(n) / sample_rate)
        .collect();
    let samples = (0..count)
        .map(|k| {
            let k = from_usize::<T>(k);
            weights
                .iter()
                .zip(&steps)
                .fold(Complex::new(T::zero(), T::zero()), |acc, (w, step)| {
                    acc + w * cis_cycles(*step * k)
                })
        })
        .collect();

    Ok(BasebandSignal {
        samples,
        sample_rate,
        reference_freq: grid.center_freq(),
        periodicity: Some(Periodicity {
            tone_spacing: grid.tone_spacing(),
            tone_span: span,
        }),
    })
}

/// Passband peak-to-average power ratio in dB: `max|e|² / (mean|e|² / 2)`.
/// A single unmodulated tone reads 3.01 dB.
pub fn papr<T: Real>(sig: &BasebandSignal<T>) -> Result<T, SignalError> {
    let mean = sig.mean_power()?;
    let peak = sig
        .samples
        .iter()
        .fold(T::zero(), |acc, s| acc.max(s.norm_sqr()));
    Ok(to_db(peak / mean))
}
