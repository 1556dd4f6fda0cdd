//! Closed-form risk and generalized gradient for one-dimensional inputs,
//! uniform density, and piecewise-affine targets.
//!
//! On each segment of the refinement by network kinks and target piece
//! boundaries the residual `N_θ − f` is affine, so the risk integrand is a
//! quadratic and every gradient integrand is a product of affine factors. All
//! segment integrals are evaluated with exact antiderivatives; the only error
//! is floating-point rounding. The gradient components are
//!
//! ```text
//! ∂w_i : 2ρ v_i ∫_{I_i} x·(N_θ − f) dx        ∂b_i : 2ρ v_i ∫_{I_i} (N_θ − f) dx
//! ∂v_i : 2ρ ∫ max{w_i x + b_i, 0}·(N_θ − f) dx  ∂c : 2ρ ∫ (N_θ − f) dx
//! ```
//!
//! with `I_i` the active region of neuron `i`. At parameters where the risk is
//! not differentiable these formulas still define the generalized gradient
//! (the limit of smoothed gradients); no special-casing is needed because a
//! neuron with `w_i = b_i = 0` has empty `I_i` and vanishing `max`-factor.

use crate::model::{refinement_nodes, DomainMeasure, ModelError, ParamVector, Target};
use crate::poly::{int_affine, int_affine_product, int_affine_sq, int_x_affine};
use crate::scalar::{norm, real, Scalar};

/// Risk with its gradient and gradient norm.
#[derive(Clone, Debug)]
pub struct RiskReport<R> {
    pub risk: R,
    pub gradient: Vec<R>,
    pub grad_norm: R,
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

/// Shared segment sweep; accumulates the density-free risk and, when `grad`
/// is given, the density-free gradient halves (scaled by `2ρ` at the end).
fn accumulate<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    mut grad: Option<&mut [R]>,
) -> R {
    let hidden = theta.shape().hidden();
    let half = real::<R>(0.5);
    if let Some(g) = grad.as_deref_mut() {
        for x in g.iter_mut() {
            *x = R::zero();
        }
    }
    let nodes = refinement_nodes(theta, target, dom);
    let mut risk_acc = R::zero();
    for seg in nodes.windows(2) {
        let (x0, x1) = (seg[0], seg[1]);
        if !(x1 > x0) {
            continue;
        }
        let mid = half * (x0 + x1);
        let (ns, nq) = crate::model::segment_affine(theta, mid);
        let piece = target.piece_at(mid);
        let (rs, rq) = (ns - piece.slope, nq - piece.intercept);
        risk_acc = risk_acc + int_affine_sq(rs, rq, x0, x1);
        if let Some(g) = grad.as_deref_mut() {
            let m0 = int_affine(rs, rq, x0, x1);
            let m1 = int_x_affine(rs, rq, x0, x1);
            for i in 0..hidden {
                if theta.preactivation(i, &[mid]) > R::zero() {
                    let v = theta.output_weight(i);
                    g[i] = g[i] + v * m1;
                    g[hidden + i] = g[hidden + i] + v * m0;
                    g[2 * hidden + i] = g[2 * hidden + i]
                        + int_affine_product(theta.weight(i, 0), theta.bias(i), rs, rq, x0, x1);
                }
            }
            g[3 * hidden] = g[3 * hidden] + m0;
        }
    }
    if let Some(g) = grad {
        let two_rho = real::<R>(2.0) * dom.rho();
        for x in g.iter_mut() {
            *x = *x * two_rho;
        }
    }
    // The integrand is a square; clamp away negative rounding residue so the
    // value can always be rooted.
    (risk_acc * dom.rho()).max(R::zero())
}

/// Exact risk `ℒ(θ) = ρ ∫_a^b (N_θ(x) − f(x))² dx`.
pub fn risk<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<R, ModelError> {
    require_1d(theta, target, dom)?;
    Ok(accumulate(theta, target, dom, None))
}

/// Exact generalized gradient, written into `out` (length `dim`).
pub fn gradient_into<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    out: &mut [R],
) -> Result<R, ModelError> {
    require_1d(theta, target, dom)?;
    assert_eq!(out.len(), theta.shape().dim(), "gradient buffer length");
    Ok(accumulate(theta, target, dom, Some(out)))
}

/// Exact generalized gradient as a fresh vector.
pub fn gradient<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<Vec<R>, ModelError> {
    let mut out = vec![R::zero(); theta.shape().dim()];
    gradient_into(theta, target, dom, &mut out)?;
    Ok(out)
}

/// Risk, gradient, and gradient norm in one segment sweep.
pub fn report<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<RiskReport<R>, ModelError> {
    let mut g = vec![R::zero(); theta.shape().dim()];
    let risk = gradient_into(theta, target, dom, &mut g)?;
    let grad_norm = norm(&g);
    Ok(RiskReport {
        risk,
        gradient: g,
        grad_norm,
    })
}

/// Central finite differences of the exact risk, component by component.
pub fn finite_difference_gradient<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    h: R,
) -> Result<Vec<R>, ModelError> {
    require_1d(theta, target, dom)?;
    assert!(h > R::zero(), "step must be positive");
    let two_h = real::<R>(2.0) * h;
    let mut out = Vec::with_capacity(theta.shape().dim());
    let mut probe = theta.clone();
    for k in 0..theta.shape().dim() {
        let original = theta.values()[k];
        probe.values_mut()[k] = original + h;
        let up = accumulate(&probe, target, dom, None);
        probe.values_mut()[k] = original - h;
        let down = accumulate(&probe, target, dom, None);
        probe.values_mut()[k] = original;
        out.push((up - down) / two_h);
    }
    Ok(out)
}

/// Verdict of `‖G(θ)‖² ≤ 4ℒ(θ)(a̅²(d+1)‖θ‖² + 1)·μ([a,b]^d)` with
/// `a̅ = max{|a|, |b|, 1}`.
#[derive(Clone, Copy, Debug)]
pub struct GradientBoundCheck<R> {
    pub lhs: R,
    pub rhs: R,
    pub ok: bool,
}

pub fn gradient_norm_bound_check<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<GradientBoundCheck<R>, ModelError> {
    let rep = report(theta, target, dom)?;
    let d = theta.shape().input_dim();
    let a_bar = dom.a().abs().max(dom.b().abs()).max(R::one());
    let four = real::<R>(4.0);
    let d_plus_1 = real::<R>((d + 1) as f64);
    let lhs = rep.grad_norm * rep.grad_norm;
    let rhs = four
        * rep.risk
        * (a_bar * a_bar * d_plus_1 * theta.norm_sq() + R::one())
        * dom.mass(d);
    let slack = R::one() + real::<R>(1e-12);
    Ok(GradientBoundCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * slack,
    })
}
