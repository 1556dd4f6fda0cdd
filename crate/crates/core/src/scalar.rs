//! Scalar abstraction: every numeric kernel is generic over the float type.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the library is generic over.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn real<R: Scalar>(x: f64) -> R {
    R::from_f64(x).expect("f64 constant must be representable in the scalar type")
}

/// Lossy view of a scalar as `f64`, for diagnostics and serialization.
#[inline]
pub fn as_f64<R: Scalar>(x: R) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Comparison convention used throughout: |x − y| ≤ atol + rtol·max(|x|, |y|).
pub fn approx_eq<R: Scalar>(x: R, y: R, atol: R, rtol: R) -> bool {
    (x - y).abs() <= atol + rtol * x.abs().max(y.abs())
}

/// Euclidean norm of a slice.
pub fn norm<R: Scalar>(xs: &[R]) -> R {
    xs.iter().fold(R::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Squared Euclidean norm of a slice.
pub fn norm_sq<R: Scalar>(xs: &[R]) -> R {
    xs.iter().fold(R::zero(), |acc, &x| acc + x * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_eq_uses_atol_plus_rtol() {
        assert!(approx_eq(1.0f64, 1.0 + 5e-13, 1e-12, 0.0));
        assert!(approx_eq(1e6f64, 1e6 * (1.0 + 1e-11), 0.0, 1e-10));
        assert!(!approx_eq(1.0f64, 1.1, 1e-12, 1e-3));
    }

    #[test]
    fn norm_matches_hand_value() {
        assert_eq!(norm(&[3.0f64, 4.0]), 5.0);
        assert_eq!(norm_sq(&[1.0f64, 2.0, 1.0, 2.0]), 10.0);
    }
}
