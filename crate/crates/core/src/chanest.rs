//! OFDM block-pilot transmission and least-squares channel estimation.
//!
//! Subcarrier `k ∈ [−M/2, M/2)` sits at `center + k·Δf` and maps to DFT bin
//! `k mod M`. The DFT is unitary: `x[t] = M^{−1/2} Σ_m X[m] exp(j2π m t / M)`,
//! so a unit pilot on every active bin gives `Σ_t |x[t]|² = active_count` per
//! useful symbol.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{from_usize, lit, Real};
use crate::signal::{BasebandSignal, ToneGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChanestError {
    #[error("invalid OFDM configuration: {0}")]
    InvalidConfig(String),
    #[error("pilot grid is {got_symbols}x{got_bins}, configuration needs {symbols}x{bins}")]
    DimensionMismatch {
        symbols: usize,
        bins: usize,
        got_symbols: usize,
        got_bins: usize,
    },
    #[error("received {got} samples, frame needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("pilot at symbol {symbol}, subcarrier {bin} is zero")]
    ZeroPilot { symbol: usize, bin: usize },
    #[error("tone at {freq} Hz does not coincide with an active subcarrier")]
    ToneOffGrid { freq: f64 },
}

/// Block-pilot OFDM parameters. Defaults: 20 MHz, 256 subcarriers, 64-sample
/// cyclic prefix, middle 10 MHz active, 20 pilot symbols, 2.4 GHz center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OfdmConfig {
    pub center_freq: f64,
    pub bandwidth: f64,
    pub subcarrier_count: usize,
    pub cp_length: usize,
    pub active_band: f64,
    pub pilot_symbol_count: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            center_freq: 2.4e9,
            bandwidth: 20e6,
            subcarrier_count: 256,
            cp_length: 64,
            active_band: 10e6,
            pilot_symbol_count: 20,
        }
    }
}

impl OfdmConfig {
    pub fn validate(&self) -> Result<(), ChanestError> {
        let bad = |msg: &str| Err(ChanestError::InvalidConfig(msg.to_string()));
        if self.subcarrier_count < 2 || !self.subcarrier_count.is_multiple_of(2) {
            return bad("subcarrier_count must be even and at least 2");
        }
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return bad("bandwidth must be positive");
        }
        if self.pilot_symbol_count == 0 {
            return bad("pilot_symbol_count must be at least 1");
        }
        if self.cp_length >= self.subcarrier_count {
            return bad("cp_length must be shorter than the symbol");
        }
        let ratio = self.active_band / self.subcarrier_spacing();
        let active = ratio.round();
        if (ratio - active).abs() > 1e-9 || active < 1.0 {
            return bad("active_band must be a positive whole number of subcarriers");
        }
        let active = active as usize;
        if active > self.subcarrier_count || !active.is_multiple_of(2) {
            return bad("active subcarrier count must be even and fit in the band");
        }
        Ok(())
    }

    /// `bandwidth / subcarrier_count` (78.125 kHz by default).
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.subcarrier_count as f64
    }

    /// Sample rate of the pilot frame (equal to the bandwidth).
    pub fn sample_rate(&self) -> f64 {
        self.bandwidth
    }

    pub fn active_count(&self) -> usize {
        (self.active_band / self.subcarrier_spacing()).round() as usize
    }

    /// Signed subcarrier indices of the active band, ascending.
    pub fn active_indices(&self) -> impl Iterator<Item = i64> {
        let half = (self.active_count() / 2) as i64;
        -half..half
    }

    /// DFT bin of a signed subcarrier index.
    pub fn bin_of(&self, k: i64) -> usize {
        k.rem_euclid(self.subcarrier_count as i64) as usize
    }

    pub fn symbol_length(&self) -> usize {
        self.subcarrier_count + self.cp_length
    }

    pub fn frame_length(&self) -> usize {
        self.symbol_length() * self.pilot_symbol_count
    }

    /// Pilot time on air, `frame_length / bandwidth` (320 µs by default).
    pub fn frame_duration(&self) -> f64 {
        self.frame_length() as f64 / self.bandwidth
    }

    pub fn active_freqs(&self) -> Vec<f64> {
        let df = self.subcarrier_spacing();
        self.active_indices()
            .map(|k| self.center_freq + k as f64 * df)
            .collect()
    }
}

/// Known reference symbols, `[symbol][active subcarrier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotGrid<T> {
    symbols: Vec<Vec<Complex<T>>>,
}

impl<T: Real> PilotGrid<T> {
    pub fn new(symbols: Vec<Vec<Complex<T>>>) -> Self {
        Self { symbols }
    }

    /// Unit pilots on every active subcarrier of every symbol.
    pub fn all_ones(cfg: &OfdmConfig) -> Self {
        let row = vec![Complex::new(T::one(), T::zero()); cfg.active_count()];
        Self {
            symbols: vec![row; cfg.pilot_symbol_count],
        }
    }

    pub fn symbols(&self) -> &[Vec<Complex<T>>] {
        &self.symbols
    }

    /// True when every reference symbol has unit magnitude.
    pub fn is_block_unit(&self) -> bool {
        self.symbols
            .iter()
            .flatten()
            .all(|p| (p.norm() - T::one()).abs() <= lit(1e-12))
    }

    fn check_dims(&self, cfg: &OfdmConfig) -> Result<(), ChanestError> {
        let got_bins = self.symbols.first().map_or(0, Vec::len);
        let ragged = self.symbols.iter().any(|row| row.len() != got_bins);
        if self.symbols.len() != cfg.pilot_symbol_count || got_bins != cfg.active_count() || ragged {
            return Err(ChanestError::DimensionMismatch {
                symbols: cfg.pilot_symbol_count,
                bins: cfg.active_count(),
                got_symbols: self.symbols.len(),
                got_bins,
            });
        }
        Ok(())
    }
}

/// Per-subcarrier channel estimates over the active band.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiEstimate<T> {
    pub subcarrier_freqs: Vec<T>,
    pub h_est: Vec<Complex<T>>,
    pub symbols_averaged: usize,
}

struct Transforms<T: Real> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> Transforms<T> {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: T::one() / from_usize::<T>(len).sqrt(),
        }
    }
}

/// Builds the time-domain pilot frame: per symbol, unitary inverse DFT of the
/// pilots on the active bins (guards zeroed) with the cyclic prefix prepended.
pub fn build_pilot_frame<T: Real>(
    cfg: &OfdmConfig,
    grid: &PilotGrid<T>,
) -> Result<BasebandSignal<T>, ChanestError> {
    cfg.validate()?;
    grid.check_dims(cfg)?;
    let m = cfg.subcarrier_count;
    let fft = Transforms::<T>::new(m);
    let zero = Complex::new(T::zero(), T::zero());
    let mut samples = Vec::with_capacity(cfg.frame_length());
    let mut buf = vec![zero; m];
    for row in grid.symbols() {
        buf.iter_mut().for_each(|b| *b = zero);
        for (k, pilot) in cfg.active_indices().zip(row) {
            buf[cfg.bin_of(k)] = *pilot;
        }
        fft.inverse.process(&mut buf);
        buf.iter_mut().for_each(|b| *b = b.scale(fft.scale));
        samples.extend_from_slice(&buf[m - cfg.cp_length..]);
        samples.extend_from_slice(&buf);
    }
    Ok(BasebandSignal::new(
        samples,
        lit(cfg.sample_rate()),
        lit(cfg.center_freq),
    ))
}

/// Least-squares estimate `Y/X` per active subcarrier, averaged over the
/// pilot symbols. Symbol timing is taken as known.
pub fn ls_estimate<T: Real>(
    received: &BasebandSignal<T>,
    cfg: &OfdmConfig,
    grid: &PilotGrid<T>,
) -> Result<CsiEstimate<T>, ChanestError> {
    cfg.validate()?;
    grid.check_dims(cfg)?;
    if received.samples.len() != cfg.frame_length() {
        return Err(ChanestError::LengthMismatch {
            expected: cfg.frame_length(),
            got: received.samples.len(),
        });
    }
    for (symbol, row) in grid.symbols().iter().enumerate() {
        if let Some(bin) = row.iter().position(|p| p.norm_sqr() == T::zero()) {
            return Err(ChanestError::ZeroPilot { symbol, bin });
        }
    }

    let m = cfg.subcarrier_count;
    let fft = Transforms::<T>::new(m);
    let zero = Complex::new(T::zero(), T::zero());
    let mut acc = vec![zero; cfg.active_count()];
    let mut buf = vec![zero; m];
    for (symbol, row) in received
        .samples
        .chunks_exact(cfg.symbol_length())
        .zip(grid.symbols())
    {
        buf.copy_from_slice(&symbol[cfg.cp_length..]);
        fft.forward.process(&mut buf);
        for ((slot, k), pilot) in acc.iter_mut().zip(cfg.active_indices()).zip(row) {
            *slot = *slot + buf[cfg.bin_of(k)].scale(fft.scale) / pilot;
        }
    }
    let count = from_usize::<T>(cfg.pilot_symbol_count);
    Ok(CsiEstimate {
        subcarrier_freqs: cfg.active_freqs().into_iter().map(lit).collect(),
        h_est: acc.into_iter().map(|h| h / count).collect(),
        symbols_averaged: cfg.pilot_symbol_count,
    })
}

/// Picks the estimate at each tone of `grid`. Tones must land on active
/// subcarriers.
pub fn extract_tone_csi<T: Real>(
    est: &CsiEstimate<T>,
    grid: &ToneGrid<T>,
) -> Result<Vec<Complex<T>>, ChanestError> {
    let freqs = &est.subcarrier_freqs;
    let first = *freqs.first().ok_or(ChanestError::ToneOffGrid {
        freq: grid.tone_freq(0).to_f64().unwrap_or(f64::NAN),
    })?;
    let spacing = if freqs.len() > 1 { freqs[1] - first } else { T::one() };
    let tolerance = spacing * lit(1e-6);
    grid.tone_freqs()
        .into_iter()
        .map(|f| {
            let position = (f - first) / spacing;
            let index = position.round();
            index
                .to_usize()
                .filter(|&i| i < freqs.len() && (freqs[i] - f).abs() <= tolerance)
                .map(|i| est.h_est[i])
                .ok_or(ChanestError::ToneOffGrid {
                    freq: f.to_f64().unwrap_or(f64::NAN),
                })
        })
        .collect()
}
