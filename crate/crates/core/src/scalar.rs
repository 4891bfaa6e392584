//! Scalar abstraction shared by every numeric module.
//!
//! All analyses are written against [`Real`], which `f32` and `f64` both
//! satisfy. The exact partition algebra in [`crate::truncation`] needs less
//! than this and accepts any commutative ring (rationals included).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating-point scalar used by the numerical modules.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Serialize
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion to `f64` for reporting and ordering.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Euclidean norm of a flat coordinate slice.
#[inline]
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Surface area of the unit sphere S^{d-1} in R^d.
pub fn unit_sphere_area<T: Real>(d: usize) -> T {
    let half = d as f64 / 2.0;
    let area = 2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half);
    lit(area)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area::<f64>(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area::<f64>(2) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((unit_sphere_area::<f64>(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn norm_f32_and_f64() {
        assert_eq!(norm(&[3.0f64, 4.0]), 5.0);
        assert_eq!(norm(&[3.0f32, 4.0]), 5.0);
    }
}
