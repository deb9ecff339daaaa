//! Closed-loop wireless power transfer link simulator.
//!
//! The numeric modules are generic over the scalar type ([`Real`], i.e. `f32`
//! or `f64`); the aliases below fix them to `f64`, which the harness uses.
//!
//! * [`signal`]: multisine tone grids, weights, synthesis, PAPR
//! * [`channel`]: tapped-delay-line channels, propagation, noise
//! * [`chanest`]: OFDM block pilots and least-squares estimation
//! * [`optimizer`]: scaled-matched-filter and baseline weights, search oracle
//! * [`rectenna`]: polynomial and efficiency-curve harvesting models
//! * [`harness`]: slot simulation, experiments, scenario files, CSV output

// Validation uses `!(x > 0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanest;
pub mod channel;
pub mod harness;
pub mod optimizer;
pub mod rectenna;
pub mod scalar;
pub mod signal;

pub use num_complex::Complex;
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type ToneGrid64 = signal::ToneGrid<f64>;
pub type MultisineWeights64 = signal::MultisineWeights<f64>;
pub type BasebandSignal64 = signal::BasebandSignal<f64>;
pub type TapDelayChannel64 = channel::TapDelayChannel<f64>;
pub type ReceivedTones64 = channel::ReceivedTones<f64>;
pub type CsiEstimate64 = chanest::CsiEstimate<f64>;
pub type PilotGrid64 = chanest::PilotGrid<f64>;
pub type SmfParams64 = optimizer::SmfParams<f64>;
pub type RectennaModel64 = rectenna::RectennaModel<f64>;

pub type ToneGrid32 = signal::ToneGrid<f32>;
pub type MultisineWeights32 = signal::MultisineWeights<f32>;
pub type TapDelayChannel32 = channel::TapDelayChannel<f32>;
pub type RectennaModel32 = rectenna::RectennaModel<f32>;
