//! Scalar abstraction: all numerics are generic over `f32`/`f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar the solver works over.
///
/// Bundles the `num-traits` arithmetic surface with what the FFT backend
/// needs. Implemented for `f32` and `f64`; concrete aliases for the main
/// types live at the crate root.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Display
    + LowerExp
    + Debug
    + rustfft::FftNum
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` literal into the working scalar type.
///
/// Panics if the value is not representable, which cannot happen for the
/// finite literals used throughout this crate.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// `to_f64` with a NaN fallback, for diagnostics carried in errors.
#[inline]
pub(crate) fn diag<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
