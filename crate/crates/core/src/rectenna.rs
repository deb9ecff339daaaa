//! Behavioral rectenna models.
//!
//! Polynomial mode truncates the diode small-signal expansion at fourth order:
//! `z = k2·E[y²] + k4·E[y⁴]`, with `y(t)` the received passband signal. For a
//! multisine with received tone weights `r_n`,
//!
//! * `E[y²] = ½ Σ |r_n|²`
//! * `E[y⁴] = ⅜ Σ_{n0+n1=n2+n3} Re{ r_n0 r_n1 r*_n2 r*_n3 }`
//!
//! where the index condition stands for `f_n0 + f_n1 = f_n2 + f_n3` on a
//! uniformly spaced grid. Efficiency-curve mode maps RF input power to DC
//! through a piecewise-linear efficiency in dBm and ignores the waveform.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ReceivedTones;
use crate::scalar::{from_usize, lit, watts_to_dbm, Real};
use crate::signal::BasebandSignal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RectennaError {
    #[error("operation needs a {expected} rectenna model")]
    WrongMode { expected: &'static str },
    #[error("invalid polynomial coefficients: k2 must be >= 0 and k4 > 0")]
    InvalidCoefficients,
    #[error("tone grid must be uniformly spaced")]
    NonUniformGrid,
    #[error("efficiency curve is empty")]
    EmptyCurve,
    #[error("efficiency curve must have increasing input power and non-decreasing efficiency in [0, 1]")]
    InvalidCurve,
    #[error("signal carries no multisine period information")]
    NotPeriodic,
    #[error("signal must span a whole number of tone periods")]
    InsufficientDuration,
    #[error("sample rate must be at least 8x the tone span")]
    InsufficientOversampling,
}

/// Schottky small-signal parameters used to derive default coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    pub saturation_current: f64,
    pub ideality: f64,
    pub thermal_voltage: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        Self {
            saturation_current: 5e-6,
            ideality: 1.05,
            thermal_voltage: 25.86e-3,
        }
    }
}

/// Fourth-order polynomial coefficients, already scaled by the antenna
/// impedance so that `z = k2·M2 + k4·M4` with `M2`, `M4` in W and W².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel<T> {
    pub k2: T,
    pub k4: T,
    pub antenna_impedance: T,
}

impl<T: Real> PolynomialModel<T> {
    pub fn new(k2: T, k4: T, antenna_impedance: T) -> Result<Self, RectennaError> {
        if !(k2 >= T::zero()) || !(k4 > T::zero()) || !k2.is_finite() || !k4.is_finite() {
            return Err(RectennaError::InvalidCoefficients);
        }
        Ok(Self {
            k2,
            k4,
            antenna_impedance,
        })
    }

    /// `k_i = i_s / (i!·(n·v_T)^i)`, scaled by `R_ant^{i/2}`.
    pub fn from_diode(diode: &DiodeParams, antenna_impedance: f64) -> Self {
        let nvt = diode.ideality * diode.thermal_voltage;
        let k2 = diode.saturation_current / (2.0 * nvt.powi(2)) * antenna_impedance;
        let k4 = diode.saturation_current / (24.0 * nvt.powi(4)) * antenna_impedance.powi(2);
        Self {
            k2: lit(k2),
            k4: lit(k4),
            antenna_impedance: lit(antenna_impedance),
        }
    }
}

impl<T: Real> Default for PolynomialModel<T> {
    fn default() -> Self {
        Self::from_diode(&DiodeParams::default(), 50.0)
    }
}

/// Piecewise-linear efficiency over input power in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyCurve<T> {
    breakpoints: Vec<(T, T)>,
}

impl<T: Real> EfficiencyCurve<T> {
    pub fn new(breakpoints: Vec<(T, T)>) -> Result<Self, RectennaError> {
        if breakpoints.is_empty() {
            return Err(RectennaError::EmptyCurve);
        }
        let in_range = breakpoints
            .iter()
            .all(|&(dbm, eta)| dbm.is_finite() && eta >= T::zero() && eta <= T::one());
        let monotone = breakpoints
            .windows(2)
            .all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1);
        if !in_range || !monotone {
            return Err(RectennaError::InvalidCurve);
        }
        Ok(Self { breakpoints })
    }

    /// Curve passing through 12% at −20 dBm continuous-wave input.
    pub fn prototype() -> Self {
        Self::new(
            [
                (-40.0, 0.004),
                (-30.0, 0.035),
                (-20.0, 0.12),
                (-10.0, 0.28),
                (0.0, 0.42),
            ]
            .into_iter()
            .map(|(d, e)| (lit(d), lit(e)))
            .collect(),
        )
        .expect("prototype curve is valid")
    }

    pub fn breakpoints(&self) -> &[(T, T)] {
        &self.breakpoints
    }

    /// Efficiency at `dbm`, clamped to the end breakpoints.
    pub fn efficiency(&self, dbm: T) -> T {
        let pts = &self.breakpoints;
        let (first, last) = (pts[0], pts[pts.len() - 1]);
        if dbm <= first.0 {
            return first.1;
        }
        if dbm >= last.0 {
            return last.1;
        }
        let upper = pts.partition_point(|&(d, _)| d <= dbm);
        let (lo, hi) = (pts[upper - 1], pts[upper]);
        if dbm == lo.0 {
            return lo.1;
        }
        lo.1 + (hi.1 - lo.1) * (dbm - lo.0) / (hi.0 - lo.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RectennaModel<T> {
    Polynomial(PolynomialModel<T>),
    EfficiencyCurve(EfficiencyCurve<T>),
}

impl<T: Real> RectennaModel<T> {
    pub fn polynomial(&self) -> Result<&PolynomialModel<T>, RectennaError> {
        match self {
            RectennaModel::Polynomial(p) => Ok(p),
            _ => Err(RectennaError::WrongMode { expected: "polynomial" }),
        }
    }

    pub fn curve(&self) -> Result<&EfficiencyCurve<T>, RectennaError> {
        match self {
            RectennaModel::EfficiencyCurve(c) => Ok(c),
            _ => Err(RectennaError::WrongMode { expected: "efficiency-curve" }),
        }
    }
}

impl<T: Real> Default for RectennaModel<T> {
    fn default() -> Self {
        RectennaModel::Polynomial(PolynomialModel::default())
    }
}

/// `E[y²]` of a multisine, `½ Σ |r_n|²`.
pub fn second_moment<T: Real>(r: &[Complex<T>]) -> T {
    crate::signal::tone_power(r)
}

/// `E[y⁴]` of a multisine on a uniform grid.
pub fn fourth_moment<T: Real>(r: &[Complex<T>]) -> T {
    let n = r.len();
    let mut sum = T::zero();
    for n0 in 0..n {
        for n1 in 0..n {
            let pair = r[n0] * r[n1];
            for n2 in 0..n {
                let Some(n3) = (n0 + n1).checked_sub(n2).filter(|&n3| n3 < n) else {
                    continue;
                };
                sum = sum + (pair * (r[n2] * r[n3]).conj()).re;
            }
        }
    }
    lit::<T>(3.0 / 8.0) * sum
}

/// `k2·M2 + k4·M4` for explicit received weights.
pub fn polynomial_dc<T: Real>(r: &[Complex<T>], model: &PolynomialModel<T>) -> T {
    model.k2 * second_moment(r) + model.k4 * fourth_moment(r)
}

/// DC metric of received tones under the polynomial model.
pub fn harvest_dc_polynomial<T: Real>(
    rx: &ReceivedTones<T>,
    model: &RectennaModel<T>,
) -> Result<T, RectennaError> {
    let poly = model.polynomial()?;
    if !(rx.grid.tone_spacing() > T::zero()) {
        return Err(RectennaError::NonUniformGrid);
    }
    Ok(polynomial_dc(&rx.rx_weights, poly))
}

/// Numerical DC metric from a time-domain envelope.
///
/// The passband signal is `y(t) = Re{e(t)·exp(j2π f_ref t)}`. Averaged over
/// carrier cycles (the carrier is far above the envelope bandwidth),
/// `y² → |e|²/2` and `y⁴ → 3|e|⁴/8`; the remaining average over envelope
/// samples is taken numerically. The signal must cover whole tone periods and
/// be sampled at 8x the tone span or faster.
pub fn time_domain_dc_oracle<T: Real>(
    sig: &BasebandSignal<T>,
    model: &RectennaModel<T>,
) -> Result<T, RectennaError> {
    let poly = model.polynomial()?;
    let period = sig.periodicity.ok_or(RectennaError::NotPeriodic)?;
    if sig.samples.is_empty() {
        return Err(RectennaError::InsufficientDuration);
    }
    let periods = sig.duration() * period.tone_spacing;
    if periods < lit(0.5) || (periods - periods.round()).abs() > lit(1e-6) {
        return Err(RectennaError::InsufficientDuration);
    }
    if sig.sample_rate < lit::<T>(8.0) * period.tone_span * (T::one() - lit(1e-12)) {
        return Err(RectennaError::InsufficientOversampling);
    }
    let (m2, m4) = sig
        .samples
        .iter()
        .fold((T::zero(), T::zero()), |(m2, m4), s| {
            let p = s.norm_sqr();
            (m2 + p, m4 + p * p)
        });
    let count = from_usize::<T>(sig.samples.len());
    Ok(poly.k2 * m2 / count / lit(2.0) + poly.k4 * lit::<T>(3.0 / 8.0) * m4 / count)
}

/// DC output in watts from RF input power through the efficiency curve.
pub fn harvest_dc_efficiency_curve<T: Real>(
    rx_rf_power: T,
    model: &RectennaModel<T>,
) -> Result<T, RectennaError> {
    let curve = model.curve()?;
    if rx_rf_power <= T::zero() {
        return Ok(T::zero());
    }
    Ok(rx_rf_power * curve.efficiency(watts_to_dbm(rx_rf_power)))
}
