//! Floating point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the geometry, features, classifiers and solver are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// (1e-9 invariance, 1e-12 bone lengths) assume `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::TAU();
    let mut r = a % two_pi;
    if r > T::PI() {
        r -= two_pi;
    } else if r <= -T::PI() {
        r += two_pi;
    }
    r
}

pub fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    x.max(lo).min(hi)
}
