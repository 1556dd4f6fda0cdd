//! Gradient-flow dynamics of shallow ReLU networks, computed exactly.
//!
//! For a one-hidden-layer ReLU network on an interval `[a, b]` with a uniform
//! input density and a piecewise-affine target, the squared-error risk and its
//! generalized gradient have closed forms: the residual is piecewise affine, so
//! every integral is the integral of a low-degree polynomial over a segment.
//! This crate evaluates those closed forms without quadrature error, integrates
//! the gradient-flow ODE with kink-aware event handling, and checks the
//! quantities the dynamics is known to conserve or bound (per-neuron
//! balancedness, the energy identity, Lyapunov growth bounds, the critical-risk
//! ladder for affine targets).
//!
//! Module map:
//!
//! * [`model`] — parameter layout, realizations, active regions, conserved
//!   quantities.
//! * [`exact_risk`] — closed-form risk and generalized gradient (d = 1).
//! * [`smoothing`] — C¹ surrogate activations, smoothed risks and their true
//!   gradients, used to validate the generalized gradient as a limit.
//! * [`flow`] — adaptive Runge–Kutta integration of `Θ' = −G(Θ)` with
//!   activation-boundary event handling and trajectory monitors.
//! * [`theory`] — best constant risk, the critical-risk ladder, small-risk
//!   structure diagnostics for width-1 networks, uniform error.
//! * [`highdim`] — Monte-Carlo risk/gradient estimators for d ≥ 1.
//! * [`verify`] — runtime property suites and the independent oracles
//!   (quadrature gradients, fixed-step Euler) they compare against.
//!
//! All numeric kernels are generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below fix the common `f64` instantiations.

// Negated float comparisons like `!(b > a)` are NaN-rejecting validity
// guards; rewriting them as `b <= a` would silently accept NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exact_risk;
pub mod flow;
pub mod highdim;
pub mod model;
mod poly;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod smoothing;
pub mod theory;
pub mod verify;

pub use model::NetworkShape;
pub use scalar::Scalar;

/// `f64` parameter vector.
pub type ParamVector64 = model::ParamVector<f64>;
/// `f64` domain with uniform density.
pub type DomainMeasure64 = model::DomainMeasure<f64>;
/// `f64` piecewise-affine target.
pub type Target64 = model::Target<f64>;
/// `f64` flow configuration.
pub type FlowConfig64 = flow::FlowConfig<f64>;
/// `f64` trajectory.
pub type Trajectory64 = flow::Trajectory<f64>;
/// `f64` critical-risk ladder.
pub type RiskLadder64 = theory::RiskLadder<f64>;

/// `f32` parameter vector (the kernels are scalar-generic; `f64` is the
/// working precision everywhere else).
pub type ParamVector32 = model::ParamVector<f32>;
