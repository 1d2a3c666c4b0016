//! Floating-point scalar abstraction.
//!
//! All of the geometry and planning code is generic over [`Real`] so the same
//! formulas run in `f32` or `f64`. The CLI and the shipped type aliases use
//! `f64`; `f32` is mostly useful for quick screening sweeps.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Display + Default + 'static {
    /// Converts an `f64` literal into `Self`, rounding if necessary.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    /// Converts into `f64` for reporting and serialization.
    #[inline]
    fn to_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite value")
    }

    /// Wraps an angle into `[-pi, pi]`.
    #[inline]
    fn wrap_angle(self) -> Self {
        let two_pi = Self::TAU();
        let mut a = (self + Self::PI()) % two_pi;
        if a < Self::zero() {
            a = a + two_pi;
        }
        a - Self::PI()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for i in -100..100 {
            let a = 0.37_f64 * i as f64;
            let w = a.wrap_angle();
            assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(&w), "{a} -> {w}");
            // Same point on the circle.
            assert!((a.sin() - w.sin()).abs() < 1e-12);
            assert!((a.cos() - w.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_angle_is_identity_inside_range() {
        assert_eq!(1.25_f64.wrap_angle(), 1.25);
        assert_eq!((-3.0_f64).wrap_angle(), -3.0);
    }

    #[test]
    fn lit_roundtrip_f32() {
        let x: f32 = Real::lit(0.5);
        assert_eq!(x, 0.5_f32);
    }
}
