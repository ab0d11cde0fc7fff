//! Scalar abstraction for the coefficient arithmetic.
//!
//! The Kamps–Cramer sums alternate in sign and lose digits quickly as `m`
//! grows, so the same code runs over primitive floats for the fast path and
//! over an arbitrary-precision binary float when the fast path is flagged.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

/// Arbitrary-precision binary float used by the extended-precision path.
pub type ExtFloat = FBig<HalfEven, 2>;

/// Real-number operations needed by the criterion sums.
///
/// `bits` arguments request a working precision; primitive floats ignore it.
pub trait Real:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_u64(value: u64, bits: usize) -> Self;
    /// Exact conversion of an `f64` (rounded only if `bits` < 53).
    fn from_f64(value: f64, bits: usize) -> Self;
    fn to_f64(&self) -> f64;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;

    fn zero(bits: usize) -> Self {
        Self::from_u64(0, bits)
    }

    fn one(bits: usize) -> Self {
        Self::from_u64(1, bits)
    }

    fn abs(&self) -> Self {
        if *self < Self::zero(53) {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

macro_rules! impl_real_for_primitive {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn from_u64(value: u64, _bits: usize) -> Self {
                value as $t
            }
            #[inline]
            fn from_f64(value: f64, _bits: usize) -> Self {
                value as $t
            }
            #[inline]
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            #[inline]
            fn ln(&self) -> Self {
                num_traits::Float::ln(*self)
            }
            #[inline]
            fn exp(&self) -> Self {
                num_traits::Float::exp(*self)
            }
            #[inline]
            fn abs(&self) -> Self {
                num_traits::Float::abs(*self)
            }
        }
    };
}

impl_real_for_primitive!(f32);
impl_real_for_primitive!(f64);

impl Real for ExtFloat {
    fn from_u64(value: u64, bits: usize) -> Self {
        ExtFloat::from(value).with_precision(bits.max(64)).value()
    }

    fn from_f64(value: f64, bits: usize) -> Self {
        let exact = ExtFloat::try_from(value).expect("finite f64");
        exact.with_precision(bits.max(53)).value()
    }

    fn to_f64(&self) -> f64 {
        self.to_f64().value()
    }

    fn ln(&self) -> Self {
        ExtFloat::ln(self)
    }

    fn exp(&self) -> Self {
        ExtFloat::exp(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_float_ln_exp_round_trip() {
        let x = ExtFloat::from_u64(45, 256);
        let back = x.ln().exp();
        assert!((Real::to_f64(&back) - 45.0).abs() < 1e-13);
        assert!((Real::to_f64(&x.ln()) - 45f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn ext_float_carries_more_digits_than_f64() {
        // (1 + 2^-80) - 1 vanishes in f64 but not at 128 bits.
        let bits = 128;
        let tiny = ExtFloat::from_f64(2f64.powi(-80), bits);
        let one = ExtFloat::one(bits);
        let diff = (one.clone() + tiny) - one;
        assert_eq!(Real::to_f64(&diff), 2f64.powi(-80));
        assert_eq!((1.0f64 + 2f64.powi(-80)) - 1.0, 0.0);
    }

    #[test]
    fn abs_works_for_all_scalars() {
        assert_eq!(Real::abs(&-2.5f64), 2.5);
        assert_eq!(Real::abs(&-2.5f32), 2.5);
        let x = -ExtFloat::from_f64(2.5, 64);
        assert_eq!(Real::to_f64(&Real::abs(&x)), 2.5);
    }
}
