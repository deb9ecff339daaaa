//! Transmit weight design: the scaled-matched-filter closed form, the
//! uniform zero-phase baseline, and an exhaustive small-N search used as a
//! reference optimum.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ReceivedTones;
use crate::rectenna::{harvest_dc_polynomial, polynomial_dc, RectennaError, RectennaModel};
use crate::scalar::{cis_cycles, from_usize, lit, Real};
use crate::signal::{MultisineWeights, SignalError, ToneGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("channel estimate is zero on every tone")]
    ZeroCsi,
    #[error("expected {expected} channel coefficients, got {got}")]
    CsiLength { expected: usize, got: usize },
    #[error("beta must be non-negative and finite (got {0})")]
    InvalidBeta(f64),
    #[error("exhaustive search supports at most {max} tones (got {got})")]
    TooManyTones { max: usize, got: usize },
    #[error("search needs at least 8 amplitude and phase levels")]
    TooFewLevels,
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Rectenna(#[from] RectennaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmfParams<T> {
    pub beta: T,
    pub power_budget: T,
}

impl<T: Real> SmfParams<T> {
    pub fn new(beta: T, power_budget: T) -> Result<Self, OptimizerError> {
        if !(beta >= T::zero()) || !beta.is_finite() {
            return Err(OptimizerError::InvalidBeta(beta.to_f64().unwrap_or(f64::NAN)));
        }
        if !(power_budget > T::zero()) || !power_budget.is_finite() {
            return Err(SignalError::InvalidBudget(power_budget.to_f64().unwrap_or(f64::NAN)).into());
        }
        Ok(Self { beta, power_budget })
    }

    /// β = 3.
    pub fn with_budget(power_budget: T) -> Result<Self, OptimizerError> {
        Self::new(lit(3.0), power_budget)
    }
}

/// `ω_n = exp(−j·arg h_n)·A_n^β·sqrt(2P / Σ A_m^{2β})`.
pub fn smf_weights<T: Real>(
    h: &[Complex<T>],
    params: &SmfParams<T>,
    grid: &ToneGrid<T>,
) -> Result<MultisineWeights<T>, OptimizerError> {
    if h.len() != grid.tone_count() {
        return Err(OptimizerError::CsiLength {
            expected: grid.tone_count(),
            got: h.len(),
        });
    }
    let peak = h.iter().fold(T::zero(), |acc, x| acc.max(x.norm()));
    if !(peak > T::zero()) {
        return Err(OptimizerError::ZeroCsi);
    }
    // Normalizing by the strongest tone leaves the result unchanged and keeps
    // A^{2β} away from underflow at realistic path losses.
    let shaped: Vec<T> = h.iter().map(|x| (x.norm() / peak).powf(params.beta)).collect();
    let norm = shaped.iter().fold(T::zero(), |acc, &a| acc + a * a);
    let scale = (lit::<T>(2.0) * params.power_budget / norm).sqrt();
    let weights = h
        .iter()
        .zip(&shaped)
        .map(|(x, &a)| Complex::from_polar(a * scale, -x.arg()))
        .collect();
    Ok(MultisineWeights::new(grid.clone(), weights, params.power_budget)?)
}

/// Uniform power allocation with zero phase: every `ω_n = sqrt(2P/N)`.
pub fn nonadaptive_weights<T: Real>(
    grid: &ToneGrid<T>,
    power_budget: T,
) -> Result<MultisineWeights<T>, OptimizerError> {
    let amplitude = (lit::<T>(2.0) * power_budget / from_usize(grid.tone_count())).sqrt();
    let weights = vec![Complex::new(amplitude, T::zero()); grid.tone_count()];
    Ok(MultisineWeights::new(grid.clone(), weights, power_budget)?)
}

/// Largest tone count accepted by [`oracle_optimal_weights`].
pub const ORACLE_MAX_TONES: usize = 4;

/// Exhaustive grid search for the weights maximizing the polynomial DC metric
/// through `h`, followed by coordinate-descent refinement.
///
/// Power shares are searched on the simplex in steps of `1/amp_levels`;
/// relative phases of tones `1..N` on `phase_levels` points per turn (tone 0
/// is pinned to phase 0, since the metric ignores a common rotation). Ties go
/// to the lexicographically smallest grid index.
pub fn oracle_optimal_weights<T: Real>(
    h: &[Complex<T>],
    power_budget: T,
    grid: &ToneGrid<T>,
    rect: &RectennaModel<T>,
    amp_levels: usize,
    phase_levels: usize,
) -> Result<MultisineWeights<T>, OptimizerError> {
    let n = h.len();
    if n != grid.tone_count() {
        return Err(OptimizerError::CsiLength {
            expected: grid.tone_count(),
            got: n,
        });
    }
    if n > ORACLE_MAX_TONES {
        return Err(OptimizerError::TooManyTones {
            max: ORACLE_MAX_TONES,
            got: n,
        });
    }
    if amp_levels < 8 || phase_levels < 8 {
        return Err(OptimizerError::TooFewLevels);
    }
    if !(power_budget > T::zero()) {
        return Err(SignalError::InvalidBudget(power_budget.to_f64().unwrap_or(f64::NAN)).into());
    }
    let poly = *rect.polynomial()?;
    let objective = |shares: &[T], phases: &[T]| -> T {
        let rx: Vec<Complex<T>> = h
            .iter()
            .zip(shares.iter().zip(phases))
            .map(|(hn, (&p, &phi))| {
                let s = (lit::<T>(2.0) * power_budget * p.max(T::zero())).sqrt();
                hn * cis_cycles(phi).scale(s)
            })
            .collect();
        polynomial_dc(&rx, &poly)
    };

    let compositions = compositions(amp_levels, n);
    let phase_points = phase_levels.pow((n - 1) as u32);
    let step = T::one() / from_usize::<T>(phase_levels);
    let amp_step = T::one() / from_usize::<T>(amp_levels);

    // (value, composition index, phase index): max value, then smallest index.
    let best = compositions
        .par_iter()
        .enumerate()
        .map(|(ci, comp)| {
            let shares: Vec<T> = comp.iter().map(|&q| from_usize::<T>(q) * amp_step).collect();
            let mut phases = vec![T::zero(); n];
            let mut local: Option<(T, usize, usize)> = None;
            for pi in 0..phase_points {
                let mut rest = pi;
                for phase in phases.iter_mut().skip(1) {
                    *phase = from_usize::<T>(rest % phase_levels) * step;
                    rest /= phase_levels;
                }
                let value = objective(&shares, &phases);
                if local.is_none_or(|(v, _, _)| value > v) {
                    local = Some((value, ci, pi));
                }
            }
            local.expect("at least one phase point")
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2) < (a.1, a.2)) {
                b
            } else {
                a
            }
        })
        .expect("at least one composition");

    let (_, ci, pi) = best;
    let mut shares: Vec<T> = compositions[ci]
        .iter()
        .map(|&q| from_usize::<T>(q) * amp_step)
        .collect();
    let mut phases = vec![T::zero(); n];
    let mut rest = pi;
    for phase in phases.iter_mut().skip(1) {
        *phase = from_usize::<T>(rest % phase_levels) * step;
        rest /= phase_levels;
    }

    refine(&mut shares, &mut phases, amp_step, step, objective);

    let weights = shares
        .iter()
        .zip(&phases)
        .map(|(&p, &phi)| {
            let s = (lit::<T>(2.0) * power_budget * p.max(T::zero())).sqrt();
            cis_cycles(phi).scale(s)
        })
        .collect();
    // Shares sum to one up to rounding; renormalize so the budget holds.
    let raw = MultisineWeights::new(grid.clone(), weights, power_budget * lit(1.0 + 1e-9))?;
    let fix = (power_budget / crate::signal::average_power(&raw)).sqrt();
    let weights = raw.weights().iter().map(|w| w.scale(fix)).collect();
    Ok(MultisineWeights::new(grid.clone(), weights, power_budget)?)
}

/// Coordinate descent over phase coordinates and pairwise share transfers,
/// halving the step size until it falls below 1e-6 of a turn or share.
fn refine<T: Real>(
    shares: &mut [T],
    phases: &mut [T],
    amp_step: T,
    phase_step: T,
    objective: impl Fn(&[T], &[T]) -> T,
) {
    let n = shares.len();
    let mut best = objective(shares, phases);
    let mut da = amp_step / lit(2.0);
    let mut dp = phase_step / lit(2.0);
    let floor = lit::<T>(1e-6);
    while da > floor || dp > floor {
        let mut improved = false;
        for i in 1..n {
            for delta in [dp, -dp] {
                let old = phases[i];
                phases[i] = old + delta;
                let value = objective(shares, phases);
                if value > best {
                    best = value;
                    improved = true;
                } else {
                    phases[i] = old;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let moved = da.min(shares[i]);
                if moved <= T::zero() {
                    continue;
                }
                shares[i] = shares[i] - moved;
                shares[j] = shares[j] + moved;
                let value = objective(shares, phases);
                if value > best {
                    best = value;
                    improved = true;
                } else {
                    shares[i] = shares[i] + moved;
                    shares[j] = shares[j] - moved;
                }
            }
        }
        if !improved {
            da = da / lit(2.0);
            dp = dp / lit(2.0);
        }
    }
}

/// All ways to write `total` as an ordered sum of `parts` non-negative
/// integers, in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn walk(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            walk(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(total, parts, &mut Vec::with_capacity(parts), &mut out);
    out
}

/// Polynomial DC metric of transmit weights through per-tone channel `h`.
pub fn dc_through<T: Real>(
    w: &MultisineWeights<T>,
    h: &[Complex<T>],
    rect: &RectennaModel<T>,
) -> Result<T, OptimizerError> {
    if h.len() != w.weights().len() {
        return Err(OptimizerError::CsiLength {
            expected: w.weights().len(),
            got: h.len(),
        });
    }
    let rx = ReceivedTones {
        grid: w.grid().clone(),
        rx_weights: h.iter().zip(w.weights()).map(|(a, b)| a * b).collect(),
    };
    Ok(harvest_dc_polynomial(&rx, rect)?)
}
