//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point type the link math is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Display + Debug + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + FftNum
        + Default
        + Display
        + Debug
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in target scalar")
}

#[inline]
pub(crate) fn from_usize<T: Real>(n: usize) -> T {
    T::from_usize(n).expect("count representable in target scalar")
}

/// `exp(j·2π·cycles)`.
#[inline]
pub(crate) fn cis_cycles<T: Real>(cycles: T) -> Complex<T> {
    let turn = cycles - cycles.round();
    Complex::from_polar(T::one(), T::TAU() * turn)
}

/// `10·log10(x)`.
#[inline]
pub fn to_db<T: Real>(x: T) -> T {
    lit::<T>(10.0) * x.log10()
}

/// Watts to dBm.
#[inline]
pub fn watts_to_dbm<T: Real>(watts: T) -> T {
    to_db(watts) + lit(30.0)
}

/// dBm to watts.
#[inline]
pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    lit::<T>(10.0).powf((dbm - lit(30.0)) / lit(10.0))
}
