//! C¹ surrogate activations and the smoothed risks they induce.
//!
//! The surrogate of index `r` vanishes on `(−∞, 1/(2r)]`, equals the identity
//! on `[1/r, ∞)`, and blends with the unique cubic Hermite interpolant in
//! between (value/derivative `(0, 0)` at `1/(2r)` and `(1/r, 1)` at `1/r`).
//! Keeping the blend window away from the origin makes the derivative at 0
//! exactly 0 for every `r`, which is the left-derivative limit the
//! generalized gradient is built from. The derivative of the blend is
//! `10t − 9t²` in window coordinates, so it stays within `[0, 25/9]`.
//!
//! Smoothed risks and their analytic gradients are integrated with
//! Gauss–Legendre panels refined at target piece boundaries and at each
//! neuron's window preimages; on every panel the integrand is a polynomial of
//! degree at most six, so the panels are exact to rounding.

use crate::model::{DomainMeasure, ModelError, ParamVector, Target};
use crate::quadrature::{adaptive_gl_refined, DEFAULT_PANEL_TOL};
use crate::scalar::{real, Scalar};

/// Upper bound of the surrogate derivative (attained at `t = 5/9`).
pub const DERIV_SUP: f64 = 25.0 / 9.0;

/// The C¹ ramp surrogate of smoothing index `r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SmoothActivation {
    r: u32,
}

impl SmoothActivation {
    pub fn new(r: u32) -> Self {
        assert!(r >= 1, "smoothing index must be positive");
        Self { r }
    }

    pub fn index(&self) -> u32 {
        self.r
    }

    /// Blend window `[1/(2r), 1/r]`.
    pub fn window<R: Scalar>(&self) -> (R, R) {
        let r = real::<R>(self.r as f64);
        let half = real::<R>(0.5);
        (half / r, R::one() / r)
    }

    /// Surrogate value.
    pub fn value<R: Scalar>(&self, x: R) -> R {
        let (x0, x1) = self.window::<R>();
        if x <= x0 {
            R::zero()
        } else if x >= x1 {
            x
        } else {
            let delta = x1 - x0;
            let t = (x - x0) / delta;
            let five = real::<R>(5.0);
            let three = real::<R>(3.0);
            delta * t * t * (five - three * t)
        }
    }

    /// Exact derivative of [`Self::value`]; 0 at the origin for every `r`.
    pub fn deriv<R: Scalar>(&self, x: R) -> R {
        let (x0, x1) = self.window::<R>();
        if x <= x0 {
            R::zero()
        } else if x >= x1 {
            R::one()
        } else {
            let t = (x - x0) / (x1 - x0);
            let ten = real::<R>(10.0);
            let nine = real::<R>(9.0);
            t * (ten - nine * t)
        }
    }
}

fn require_1d<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<(), ModelError> {
    let d = theta.shape().input_dim();
    if d != 1 {
        return Err(ModelError::DimensionNot1(d));
    }
    target.check_span(dom)
}

/// Panel nodes: domain endpoints, target piece boundaries, and the preimages
/// of each neuron's blend window.
fn smoothing_nodes<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    act: SmoothActivation,
) -> Vec<R> {
    let mut nodes = vec![dom.a(), dom.b()];
    for p in target.pieces() {
        if p.hi > dom.a() && p.hi < dom.b() {
            nodes.push(p.hi);
        }
    }
    let (x0, x1) = act.window::<R>();
    for i in 0..theta.shape().hidden() {
        let w = theta.weight(i, 0);
        if w != R::zero() {
            for s in [x0, x1] {
                let x = (s - theta.bias(i)) / w;
                if x > dom.a() && x < dom.b() {
                    nodes.push(x);
                }
            }
        }
    }
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    nodes.dedup_by(|a, b| (*a - *b).abs() <= real::<R>(1e-15));
    nodes
}

fn smoothed_realization<R: Scalar>(theta: &ParamVector<R>, act: SmoothActivation, x: R) -> R {
    let mut acc = theta.output_bias();
    for i in 0..theta.shape().hidden() {
        acc = acc + theta.output_weight(i) * act.value(theta.preactivation(i, &[x]));
    }
    acc
}

/// Smoothed risk `𝔏_r(θ) = ρ ∫ (f − N_r,θ)² dx`.
pub fn smoothed_risk<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    r: u32,
) -> Result<R, ModelError> {
    require_1d(theta, target, dom)?;
    let act = SmoothActivation::new(r);
    let nodes = smoothing_nodes(theta, target, dom, act);
    let tol = real::<R>(DEFAULT_PANEL_TOL);
    let value = adaptive_gl_refined(
        |x| {
            let res = smoothed_realization(theta, act, x) - target.value(x);
            res * res
        },
        &nodes,
        tol,
    );
    Ok((value * dom.rho()).max(R::zero()))
}

/// Analytic gradient of the smoothed risk (chain rule through the surrogate),
/// integrated on the same panel refinement as [`smoothed_risk`].
pub fn smoothed_gradient<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    r: u32,
) -> Result<Vec<R>, ModelError> {
    require_1d(theta, target, dom)?;
    let act = SmoothActivation::new(r);
    let nodes = smoothing_nodes(theta, target, dom, act);
    let tol = real::<R>(DEFAULT_PANEL_TOL);
    let hidden = theta.shape().hidden();
    let two_rho = real::<R>(2.0) * dom.rho();
    let mut out = vec![R::zero(); theta.shape().dim()];
    for i in 0..hidden {
        let v = theta.output_weight(i);
        out[i] = two_rho
            * adaptive_gl_refined(
                |x| {
                    let res = smoothed_realization(theta, act, x) - target.value(x);
                    v * act.deriv(theta.preactivation(i, &[x])) * x * res
                },
                &nodes,
                tol,
            );
        out[hidden + i] = two_rho
            * adaptive_gl_refined(
                |x| {
                    let res = smoothed_realization(theta, act, x) - target.value(x);
                    v * act.deriv(theta.preactivation(i, &[x])) * res
                },
                &nodes,
                tol,
            );
        out[2 * hidden + i] = two_rho
            * adaptive_gl_refined(
                |x| {
                    let res = smoothed_realization(theta, act, x) - target.value(x);
                    act.value(theta.preactivation(i, &[x])) * res
                },
                &nodes,
                tol,
            );
    }
    out[3 * hidden] = two_rho
        * adaptive_gl_refined(
            |x| smoothed_realization(theta, act, x) - target.value(x),
            &nodes,
            tol,
        );
    Ok(out)
}
