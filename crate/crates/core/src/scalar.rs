//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the geometry is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Tolerance floor: `k` units of machine epsilon, but never below `x`.
    fn tol(x: f64, k: f64) -> Self {
        lit::<Self>(x).max(Self::epsilon() * lit(k))
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub type V2<T> = [T; 2];

#[inline]
pub(crate) fn add<T: Real>(a: V2<T>, b: V2<T>) -> V2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub(crate) fn sub<T: Real>(a: V2<T>, b: V2<T>) -> V2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn scale<T: Real>(s: T, a: V2<T>) -> V2<T> {
    [s * a[0], s * a[1]]
}

#[inline]
pub(crate) fn axpy<T: Real>(a: V2<T>, s: T, b: V2<T>) -> V2<T> {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

#[inline]
pub(crate) fn norm<T: Real>(a: V2<T>) -> T {
    a[0].hypot(a[1])
}
