//! Exact antiderivatives of affine products over a segment. The residual of a
//! piecewise-affine realization against a piecewise-affine target is affine on
//! each refinement segment, so these four primitives cover every integral the
//! closed-form risk and gradient need.

use crate::scalar::{real, Scalar};

/// `∫_{x0}^{x1} (p·x + q) dx`
pub fn int_affine<R: Scalar>(p: R, q: R, x0: R, x1: R) -> R {
    let half = real::<R>(0.5);
    half * p * (x1 * x1 - x0 * x0) + q * (x1 - x0)
}

/// `∫_{x0}^{x1} x·(p·x + q) dx`
pub fn int_x_affine<R: Scalar>(p: R, q: R, x0: R, x1: R) -> R {
    let half = real::<R>(0.5);
    let third = real::<R>(1.0 / 3.0);
    third * p * (x1 * x1 * x1 - x0 * x0 * x0) + half * q * (x1 * x1 - x0 * x0)
}

/// `∫_{x0}^{x1} (p1·x + q1)(p2·x + q2) dx`
pub fn int_affine_product<R: Scalar>(p1: R, q1: R, p2: R, q2: R, x0: R, x1: R) -> R {
    let half = real::<R>(0.5);
    let third = real::<R>(1.0 / 3.0);
    third * p1 * p2 * (x1 * x1 * x1 - x0 * x0 * x0)
        + half * (p1 * q2 + p2 * q1) * (x1 * x1 - x0 * x0)
        + q1 * q2 * (x1 - x0)
}

/// `∫_{x0}^{x1} (p·x + q)² dx`
pub fn int_affine_sq<R: Scalar>(p: R, q: R, x0: R, x1: R) -> R {
    int_affine_product(p, q, p, q, x0, x1)
}
