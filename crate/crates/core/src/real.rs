//! Scalar abstraction shared by every integrator and series evaluator.
//!
//! Everything numeric is generic over [`Real`] so that the same stepping code
//! can run in `f64` for experiments and in an extended-precision type when a
//! test needs to resolve local errors below double rounding.

use num_traits::{Float, NumCast};
use std::fmt::Debug;

pub trait Real: Float + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal. Panics only for types that cannot hold it.
    ///
    /// Goes through `NumCast` rather than `FromPrimitive`: some double-double
    /// types implement `FromPrimitive::from_f64` via an integer cast.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("f64 literal representable")
    }
}

impl<T> Real for T where T: Float + Debug + Send + Sync + 'static {}

/// Sup-norm of a vector.
pub fn sup_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Sup-norm of `a - b`.
pub fn sup_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

pub fn euclid_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
}

pub fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

pub fn from_f64<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}
