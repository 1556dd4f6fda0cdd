//! Runtime property suites and the independent oracles they compare against.
//!
//! Two oracles deliberately avoid the closed-form integration path:
//!
//! * [`quadrature_risk`] / [`quadrature_gradient`] evaluate the risk and the
//!   generalized-gradient integrands pointwise and integrate them with
//!   adaptive Gauss–Legendre panels.
//! * [`euler_flow`] integrates the flow with fixed-step explicit Euler.
//!
//! The suites are the machine-checkable form of each module's invariants; the
//! CLI `verify` subcommand runs them and the acceptance tests reuse them.

use crate::exact_risk::{self, finite_difference_gradient, gradient, gradient_norm_bound_check};
use crate::flow::{
    boundedness_check, energy_residual, integrate, limsup_bound_check, lyapunov_check,
    monotonicity_defect, FlowConfig, FlowError, Trajectory,
};
use crate::highdim::{mc_gradient, mc_risk};
use crate::model::{
    active_interval, refinement_nodes, DomainMeasure, ModelError, NetworkShape, ParamVector,
    Target,
};
use crate::quadrature::adaptive_gl_refined;
use crate::rng::{derive_seed, standard_normal, uniform01};
use crate::scalar::{norm, real, Scalar};
use crate::smoothing::{smoothed_gradient, smoothed_risk, SmoothActivation};
use crate::theory::{best_constant_risk, small_risk_diagnostics};
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

/// Outcome of one named property over a batch of cases.
#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub name: String,
    pub cases: usize,
    /// Worst deviation observed, in the property's own units.
    pub max_deviation: f64,
    pub pass: bool,
}

impl PropertyReport {
    fn new(name: &str, cases: usize, max_deviation: f64, pass: bool) -> Self {
        Self {
            name: name.to_string(),
            cases,
            max_deviation,
            pass,
        }
    }
}

/// Named property suites, one per module plus `all`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Gradient,
    Smoothing,
    Flow,
    Theory,
    Highdim,
    All,
}

impl Suite {
    pub fn default_cases(&self) -> usize {
        match self {
            Suite::Gradient => 500,
            Suite::Smoothing => 100,
            Suite::Flow => 20,
            Suite::Theory => 10_000,
            Suite::Highdim => 100,
            Suite::All => 0,
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gradient" => Ok(Suite::Gradient),
            "smoothing" => Ok(Suite::Smoothing),
            "flow" => Ok(Suite::Flow),
            "theory" => Ok(Suite::Theory),
            "highdim" => Ok(Suite::Highdim),
            "all" => Ok(Suite::All),
            other => Err(format!(
                "unknown suite '{other}' (expected gradient, smoothing, flow, theory, highdim, or all)"
            )),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Gradient => "gradient",
            Suite::Smoothing => "smoothing",
            Suite::Flow => "flow",
            Suite::Theory => "theory",
            Suite::Highdim => "highdim",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

/// Run a suite; `cases = 0` uses the suite default.
pub fn run_suite(suite: Suite, seed: u64, cases: usize) -> Vec<PropertyReport> {
    let n = if cases == 0 { suite.default_cases() } else { cases };
    match suite {
        Suite::Gradient => gradient_suite(seed, n),
        Suite::Smoothing => smoothing_suite(seed, n),
        Suite::Flow => flow_suite(seed, n),
        Suite::Theory => theory_suite(seed, n),
        Suite::Highdim => highdim_suite(seed, n),
        Suite::All => {
            let mut out = Vec::new();
            for s in [
                Suite::Gradient,
                Suite::Smoothing,
                Suite::Flow,
                Suite::Theory,
                Suite::Highdim,
            ] {
                let n = if cases == 0 { s.default_cases() } else { cases };
                out.extend(run_suite(s, seed, n));
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Risk by adaptive quadrature of the pointwise integrand (d = 1).
pub fn quadrature_risk<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<R, ModelError> {
    let d = theta.shape().input_dim();
    if d != 1 {
        return Err(ModelError::DimensionNot1(d));
    }
    target.check_span(dom)?;
    let nodes = refinement_nodes(theta, target, dom);
    let tol = real::<R>(1e-14);
    let raw = adaptive_gl_refined(
        |x| {
            let res = theta.realization_1d(x) - target.value(x);
            res * res
        },
        &nodes,
        tol,
    );
    Ok(raw * dom.rho())
}

/// Generalized gradient by adaptive quadrature of the component integrands
/// over the active regions (d = 1).
pub fn quadrature_gradient<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Result<Vec<R>, ModelError> {
    let d = theta.shape().input_dim();
    if d != 1 {
        return Err(ModelError::DimensionNot1(d));
    }
    target.check_span(dom)?;
    let hidden = theta.shape().hidden();
    let nodes = refinement_nodes(theta, target, dom);
    let tol = real::<R>(1e-14);
    let two_rho = real::<R>(2.0) * dom.rho();
    let res = |x: R| theta.realization_1d(x) - target.value(x);
    let mut out = vec![R::zero(); theta.shape().dim()];
    for i in 0..hidden {
        let region = active_interval(theta, i, dom)?;
        if !region.is_empty() {
            let sub: Vec<R> = nodes
                .iter()
                .copied()
                .filter(|&x| x >= region.lo() && x <= region.hi())
                .chain([region.lo(), region.hi()])
                .collect();
            let mut sub = sub;
            sub.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sub.dedup_by(|a, b| (*a - *b).abs() <= real::<R>(1e-15));
            let v = theta.output_weight(i);
            out[i] = two_rho * v * adaptive_gl_refined(|x| x * res(x), &sub, tol);
            out[hidden + i] = two_rho * v * adaptive_gl_refined(&res, &sub, tol);
        }
        out[2 * hidden + i] = two_rho
            * adaptive_gl_refined(
                |x| theta.preactivation(i, &[x]).max(R::zero()) * res(x),
                &nodes,
                tol,
            );
    }
    out[3 * hidden] = two_rho * adaptive_gl_refined(&res, &nodes, tol);
    Ok(out)
}

/// Fixed-step explicit Euler flow, the brute-force fixture the adaptive
/// integrator is checked against.
pub fn euler_flow<R: Scalar>(
    theta0: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
    t_end: R,
    dt: R,
) -> Result<ParamVector<R>, FlowError> {
    let d = theta0.shape().input_dim();
    if d != 1 {
        return Err(ModelError::DimensionNot1(d).into());
    }
    let mut theta = theta0.clone();
    let mut g = vec![R::zero(); theta0.shape().dim()];
    let mut t = R::zero();
    while t < t_end {
        let h = dt.min(t_end - t);
        crate::exact_risk::gradient_into(&theta, target, dom, &mut g)?;
        for (x, gk) in theta.values_mut().iter_mut().zip(&g) {
            *x = *x - h * *gk;
        }
        if !theta.is_finite() {
            return Err(FlowError::NonFinite {
                t: crate::scalar::as_f64(t),
            });
        }
        t = t + h;
    }
    Ok(theta)
}

/// Finite-difference comparison verdict; points violating the known
/// differentiability condition are reported, not failed.
#[derive(Clone, Copy, Debug)]
pub enum FdVerdict {
    Compared { max_abs_err: f64, tol: f64 },
    ExcludedNondifferentiable,
}

/// Compare the exact gradient against central differences of the exact risk.
/// Excluded when some neuron has `w_i = b_i = 0` with `v_i ≠ 0` and positive
/// risk (the differentiability hypothesis fails there).
pub fn fd_check(
    theta: &ParamVector<f64>,
    target: &Target<f64>,
    dom: &DomainMeasure<f64>,
    h: f64,
) -> Result<FdVerdict, ModelError> {
    let risk = exact_risk::risk(theta, target, dom)?;
    if risk > 0.0 {
        for i in 0..theta.shape().hidden() {
            let degenerate = (0..theta.shape().input_dim())
                .map(|j| theta.weight(i, j).abs())
                .sum::<f64>()
                + theta.bias(i).abs()
                == 0.0;
            if degenerate && theta.output_weight(i) != 0.0 {
                return Ok(FdVerdict::ExcludedNondifferentiable);
            }
        }
    }
    let g = gradient(theta, target, dom)?;
    let fd = finite_difference_gradient(theta, target, dom, h)?;
    let max_abs_err = g
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let tol = 1e-5f64.max(1e-4 * norm(&g));
    Ok(FdVerdict::Compared { max_abs_err, tol })
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

/// A randomly drawn problem: parameters, affine target, and domain.
pub struct Instance {
    pub theta: ParamVector<f64>,
    pub target: Target<f64>,
    pub dom: DomainMeasure<f64>,
}

/// Random d = 1 instance with hidden width drawn from `widths`.
pub fn random_instance(seed: u64, case: u64, widths: &[usize]) -> Instance {
    let s = derive_seed(seed, case);
    let hidden = widths[(mix(s, 0) % widths.len() as u64) as usize];
    let a = 2.0 * uniform01::<f64>(s, 1) - 1.0;
    let width = 0.5 + 1.5 * uniform01::<f64>(s, 2);
    let rho = 0.5 + 1.5 * uniform01::<f64>(s, 3);
    let alpha = 3.0 * uniform01::<f64>(s, 4) - 1.5;
    let beta = 2.0 * uniform01::<f64>(s, 5) - 1.0;
    let dom = DomainMeasure::new(a, a + width, rho).unwrap();
    let target = Target::affine(alpha, beta, &dom);
    let shape = NetworkShape::new(1, hidden);
    let values: Vec<f64> = (0..shape.dim())
        .map(|k| standard_normal(derive_seed(s, 7), k as u64))
        .collect();
    let theta = ParamVector::new(shape, values).unwrap();
    Instance { theta, target, dom }
}

fn mix(seed: u64, k: u64) -> u64 {
    crate::rng::mix64(seed, k)
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

fn gradient_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let widths = [1usize, 2, 4, 8];
    let results: Vec<(f64, f64, f64, f64, bool)> = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let inst = random_instance(seed, case, &widths);
            let (theta, target, dom) = (&inst.theta, &inst.target, &inst.dom);
            let r_exact = exact_risk::risk(theta, target, dom).unwrap();
            let r_quad = quadrature_risk(theta, target, dom).unwrap();
            let risk_dev = (r_exact - r_quad).abs() / (1e-12 + r_exact.abs().max(r_quad.abs()));
            let g_exact = gradient(theta, target, dom).unwrap();
            let g_quad = quadrature_gradient(theta, target, dom).unwrap();
            let diff: Vec<f64> = g_exact.iter().zip(&g_quad).map(|(a, b)| a - b).collect();
            let grad_dev = norm(&diff) / (1e-12 + norm(&g_exact).max(norm(&g_quad)));
            let fd_dev = match fd_check(theta, target, dom, 1e-6).unwrap() {
                FdVerdict::Compared { max_abs_err, tol } => max_abs_err / tol,
                FdVerdict::ExcludedNondifferentiable => 0.0,
            };
            let bound = gradient_norm_bound_check(theta, target, dom).unwrap();
            // Density scaling: doubling rho doubles risk and gradient.
            let dom2 = DomainMeasure::new(dom.a(), dom.b(), 2.0 * dom.rho()).unwrap();
            let r2 = exact_risk::risk(theta, target, &dom2).unwrap();
            let scale_dev = (r2 - 2.0 * r_exact).abs() / (1e-12 + r_exact.abs());
            (risk_dev, grad_dev, fd_dev, scale_dev, bound.ok)
        })
        .collect();
    let fold_max = |vals: Vec<f64>| vals.into_iter().fold(0.0f64, f64::max);
    let risk_dev = fold_max(results.iter().map(|r| r.0).collect());
    let grad_dev = fold_max(results.iter().map(|r| r.1).collect());
    let fd_dev = fold_max(results.iter().map(|r| r.2).collect());
    let scale_dev = fold_max(results.iter().map(|r| r.3).collect());
    let bound_fails = results.iter().filter(|r| !r.4).count();
    let lsc_dev = lsc_probe(seed);
    vec![
        PropertyReport::new("risk_vs_quadrature_rel", cases, risk_dev, risk_dev <= 1e-10),
        PropertyReport::new("gradient_vs_quadrature_rel", cases, grad_dev, grad_dev <= 1e-9),
        PropertyReport::new("finite_difference_scaled", cases, fd_dev, fd_dev <= 1.0),
        PropertyReport::new("density_scaling_rel", cases, scale_dev, scale_dev <= 1e-13),
        PropertyReport::new(
            "gradient_norm_bound",
            cases,
            bound_fails as f64,
            bound_fails == 0,
        ),
        PropertyReport::new("gradient_norm_lsc", 50, lsc_dev, lsc_dev <= 1e-8),
    ]
}

/// Worst drop of `‖G‖` below its value at a degenerate point, over random
/// approach rays; lower semicontinuity says this stays ≤ 0 in the limit.
fn lsc_probe(seed: u64) -> f64 {
    let dom = DomainMeasure::new(0.0, 1.0, 1.0).unwrap();
    let target = Target::affine(1.0, 0.0, &dom);
    let shape = NetworkShape::new(1, 2);
    let theta = ParamVector::new(shape, vec![1.1, 0.0, -0.4, 0.0, 0.7, 0.9, 0.2]).unwrap();
    let base = norm(&gradient(&theta, &target, &dom).unwrap());
    let mut worst: f64 = 0.0;
    for ray in 0..50u64 {
        let s = derive_seed(seed ^ 0x5eed_0001, ray);
        let dir: Vec<f64> = (0..shape.dim()).map(|k| standard_normal(s, k as u64)).collect();
        let mut min_norm = f64::INFINITY;
        for n in 30..=46 {
            let eta = 0.5f64.powi(n);
            let mut probe = theta.clone();
            for (x, d) in probe.values_mut().iter_mut().zip(&dir) {
                *x += eta * d;
            }
            min_norm = min_norm.min(norm(&gradient(&probe, &target, &dom).unwrap()));
        }
        worst = worst.max(base - min_norm);
    }
    worst
}

fn smoothing_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let widths = [1usize, 2, 4];
    let rs = [10u32, 100, 1000, 10_000];
    let results: Vec<(f64, f64, f64, f64)> = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let inst = random_instance(seed, case, &widths);
            let (theta, target, dom) = (&inst.theta, &inst.target, &inst.dom);
            let exact = exact_risk::risk(theta, target, dom).unwrap();
            let g_exact = gradient(theta, target, dom).unwrap();
            let mut risk_mono: f64 = 0.0;
            let mut grad_mono: f64 = 0.0;
            let mut prev_risk_err = f64::INFINITY;
            let mut prev_grad_err = f64::INFINITY;
            let mut final_grad_err = f64::NAN;
            for &r in &rs {
                let lr = smoothed_risk(theta, target, dom, r).unwrap();
                let risk_err = (lr - exact).abs();
                risk_mono = risk_mono.max(risk_err - prev_risk_err);
                prev_risk_err = risk_err;
                let gr = smoothed_gradient(theta, target, dom, r).unwrap();
                let diff: Vec<f64> = gr.iter().zip(&g_exact).map(|(a, b)| a - b).collect();
                let grad_err = norm(&diff);
                grad_mono = grad_mono.max(grad_err - prev_grad_err);
                prev_grad_err = grad_err;
                final_grad_err = grad_err;
            }
            let limit_dev = final_grad_err / (1e-2 * (1.0 + norm(&g_exact)));
            (risk_mono, grad_mono, limit_dev, prev_risk_err)
        })
        .collect();
    let risk_mono = results.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let grad_mono = results.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let limit_dev = results.iter().map(|r| r.2).fold(0.0f64, f64::max);
    let family_dev = family_probe();
    vec![
        PropertyReport::new("risk_error_monotone", cases, risk_mono, risk_mono <= 1e-12),
        PropertyReport::new("gradient_error_monotone", cases, grad_mono, grad_mono <= 1e-12),
        PropertyReport::new("gradient_limit_scaled", cases, limit_dev, limit_dev <= 1.0),
        PropertyReport::new("family_pointwise_limit", 24, family_dev, family_dev < 1e-3),
    ]
}

/// Worst pointwise deviation of the surrogate family from the ReLU and its
/// left-derivative indicator at the largest index on the reference grid.
fn family_probe() -> f64 {
    let grid = [-1.0f64, -0.1, 0.0, 0.01, 0.1, 1.0];
    let act = SmoothActivation::new(10_000);
    let mut worst: f64 = 0.0;
    for &x in &grid {
        let relu = x.max(0.0);
        let step = if x > 0.0 { 1.0 } else { 0.0 };
        worst = worst.max((act.value(x) - relu).abs() + (act.deriv(x) - step).abs());
    }
    worst
}

/// Standard flow-instance generator: H ≤ 4, affine target, normal(0, 1/√H)
/// initialization.
pub fn random_flow_instance(seed: u64, case: u64) -> Instance {
    let s = derive_seed(seed, case);
    let widths = [1usize, 2, 3, 4];
    let hidden = widths[(mix(s, 0) % widths.len() as u64) as usize];
    let a = uniform01::<f64>(s, 1) - 0.75;
    let width = 0.75 + 0.75 * uniform01::<f64>(s, 2);
    let rho = 0.5 + uniform01::<f64>(s, 3);
    let alpha = (0.4 + 1.1 * uniform01::<f64>(s, 4)) * if mix(s, 6).is_multiple_of(2) { 1.0 } else { -1.0 };
    let beta = 2.0 * uniform01::<f64>(s, 5) - 1.0;
    let dom = DomainMeasure::new(a, a + width, rho).unwrap();
    let target = Target::affine(alpha, beta, &dom);
    let shape = NetworkShape::new(1, hidden);
    let scale = 1.0 / (hidden as f64).sqrt();
    let values: Vec<f64> = (0..shape.dim())
        .map(|k| scale * standard_normal::<f64>(derive_seed(s, 8), k as u64))
        .collect();
    let theta = ParamVector::new(shape, values).unwrap();
    Instance { theta, target, dom }
}

/// One monitored flow run with the conservative defaults used by the suites.
pub fn run_flow_case(inst: &Instance, t_end: f64) -> Result<Trajectory<f64>, FlowError> {
    let cfg = FlowConfig::new(t_end);
    integrate(&inst.theta, &inst.target, &inst.dom, &cfg, None)
}

fn flow_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let runs: Vec<(Instance, Trajectory<f64>)> = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let inst = random_flow_instance(seed, case);
            let traj = run_flow_case(&inst, 100.0).expect("flow run failed");
            (inst, traj)
        })
        .collect();
    let mut conservation: f64 = 0.0;
    let mut energy: f64 = 0.0;
    let mut lyapunov: f64 = 0.0;
    let mut bounded_fails = 0usize;
    let mut ceiling: f64 = 0.0;
    let mut monotone: f64 = 0.0;
    for (inst, traj) in &runs {
        let l0 = traj.risk[0];
        conservation = conservation.max(traj.max_balancedness_drift() / 1e-8);
        energy = energy.max(energy_residual(traj) / (1e-6 * (1.0 + l0)));
        let lyap = lyapunov_check(traj, &inst.target, &inst.dom);
        lyapunov = lyapunov.max(lyap.max_violation / (1e-6 * (1.0 + traj.lyapunov[0])));
        if !boundedness_check(traj, &inst.target, &inst.dom).ok {
            bounded_fails += 1;
        }
        let lim = limsup_bound_check(traj, &inst.target, &inst.dom);
        ceiling = ceiling.max(lim.terminal_risk - lim.const_bound);
        monotone = monotone.max(monotonicity_defect(traj) / (1e-10 * (1.0 + l0)));
    }
    // Euler equivalence on the first five instances, at t = 1.
    let euler_cases = cases.min(5);
    let euler_dev = (0..euler_cases as u64)
        .into_par_iter()
        .map(|case| {
            let inst = random_flow_instance(seed, case);
            let cfg = FlowConfig {
                dt_max: 1e-2,
                ..FlowConfig::new(1.0)
            };
            let traj = integrate(&inst.theta, &inst.target, &inst.dom, &cfg, None).unwrap();
            let euler = euler_flow(&inst.theta, &inst.target, &inst.dom, 1.0, 1e-5).unwrap();
            let diff: Vec<f64> = traj
                .terminal_params()
                .values()
                .iter()
                .zip(euler.values())
                .map(|(a, b)| a - b)
                .collect();
            norm(&diff)
        })
        .reduce(|| 0.0f64, f64::max);
    vec![
        PropertyReport::new("balancedness_drift_scaled", cases, conservation, conservation <= 1.0),
        PropertyReport::new("energy_residual_scaled", cases, energy, energy <= 1.0),
        PropertyReport::new("lyapunov_violation_scaled", cases, lyapunov, lyapunov <= 1.0),
        PropertyReport::new(
            "norm_boundedness",
            cases,
            bounded_fails as f64,
            bounded_fails == 0,
        ),
        PropertyReport::new("constant_risk_ceiling", cases, ceiling, ceiling <= 1e-8),
        PropertyReport::new("monotone_risk_scaled", cases, monotone, monotone <= 1.0),
        PropertyReport::new("euler_equivalence_t1", euler_cases, euler_dev, euler_dev <= 1e-4),
    ]
}

fn theory_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    // Ladder ordering and the minimum positive rung formula.
    let mut ladder_dev: f64 = 0.0;
    for h in 1..=8usize {
        let ladder = crate::theory::critical_ladder(h, 1.3f64, -0.5, 1.5, 0.7);
        for pair in ladder.rungs().windows(2) {
            if pair[0].value <= pair[1].value {
                ladder_dev = f64::INFINITY;
            }
        }
        let want =
            0.7 * 1.3 * 1.3 * 8.0 / (12.0 * ((2 * (h / 2) + 1) as f64).powi(4));
        ladder_dev = ladder_dev.max((ladder.min_positive().unwrap() - want).abs());
    }
    // Best-constant closed form on random affine instances.
    let mut const_dev: f64 = 0.0;
    for case in 0..100u64 {
        let s = derive_seed(seed, case);
        let alpha = 4.0 * uniform01::<f64>(s, 0) - 2.0;
        let beta = 2.0 * uniform01::<f64>(s, 1) - 1.0;
        let a = 2.0 * uniform01::<f64>(s, 2) - 1.0;
        let width = 0.5 + 1.5 * uniform01::<f64>(s, 3);
        let rho = 0.5 + 1.5 * uniform01::<f64>(s, 4);
        let dom = DomainMeasure::new(a, a + width, rho).unwrap();
        let target = Target::affine(alpha, beta, &dom);
        let want = rho * alpha * alpha * width.powi(3) / 12.0;
        let got = best_constant_risk(&target, &dom);
        const_dev = const_dev.max((got - want).abs() / (1e-12 + want.abs()));
    }
    // Small-risk structural sweep.
    let dom = DomainMeasure::new(-0.25, 1.25, 1.0).unwrap();
    let (alpha, beta) = (0.9, -0.2);
    let violations: usize = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let s = derive_seed(seed ^ 0x7411, case);
            let theta = ParamVector::width1(
                2.0 * standard_normal::<f64>(s, 0),
                standard_normal::<f64>(s, 1),
                2.0 * standard_normal::<f64>(s, 2),
                standard_normal::<f64>(s, 3),
            );
            let rep = small_risk_diagnostics(&theta, alpha, beta, &dom).unwrap();
            let mut bad = 0usize;
            if rep.sign_ok == Some(false) {
                bad += 1;
            }
            if rep.active_ok == Some(false) {
                bad += 1;
            }
            if let Some(bound) = rep.slope_lower_bound {
                if rep.slope_product < bound - 1e-12 {
                    bad += 1;
                }
            }
            bad
        })
        .sum();
    vec![
        PropertyReport::new("ladder_ordering_and_min_rung", 8, ladder_dev, ladder_dev <= 1e-14),
        PropertyReport::new("best_constant_affine_formula", 100, const_dev, const_dev <= 1e-12),
        PropertyReport::new(
            "small_risk_structure",
            cases,
            violations as f64,
            violations == 0,
        ),
    ]
}

fn highdim_suite(seed: u64, cases: usize) -> Vec<PropertyReport> {
    let widths = [1usize, 2, 4];
    let n = 20_000;
    let results: Vec<(f64, f64)> = (0..cases as u64)
        .into_par_iter()
        .map(|case| {
            let inst = random_instance(derive_seed(seed, 0xacc), case, &widths);
            let (theta, target, dom) = (&inst.theta, &inst.target, &inst.dom);
            let (alpha, beta) = target.as_affine().unwrap();
            let f = move |x: &[f64]| alpha * x[0] + beta;
            let exact = exact_risk::risk(theta, target, dom).unwrap();
            let est = mc_risk(theta, &f, dom, n, derive_seed(seed, case));
            let risk_dev = (est.mean - exact).abs() / (4.0 * est.std_error + 1e-12);
            let g = gradient(theta, target, dom).unwrap();
            let gest = mc_gradient(theta, &f, dom, n, derive_seed(seed, case + 1_000_000));
            let grad_dev = g
                .iter()
                .zip(&gest.mean)
                .zip(&gest.std_error)
                .map(|((e, m), se)| (m - e).abs() / (4.0 * se + 1e-12))
                .fold(0.0f64, f64::max);
            (risk_dev, grad_dev)
        })
        .collect();
    let risk_dev = results.iter().map(|r| r.0).fold(0.0f64, f64::max);
    let grad_dev = results.iter().map(|r| r.1).fold(0.0f64, f64::max);
    // Determinism: identical seeds must reproduce identical bits.
    let inst = random_instance(derive_seed(seed, 0xacc), 0, &widths);
    let (alpha, beta) = inst.target.as_affine().unwrap();
    let f = move |x: &[f64]| alpha * x[0] + beta;
    let e1 = mc_risk(&inst.theta, &f, &inst.dom, 10_000, seed);
    let e2 = mc_risk(&inst.theta, &f, &inst.dom, 10_000, seed);
    let deterministic = e1.mean.to_bits() == e2.mean.to_bits()
        && e1.std_error.to_bits() == e2.std_error.to_bits();
    vec![
        PropertyReport::new("mc_risk_within_4_sigma", cases, risk_dev, risk_dev <= 1.0),
        PropertyReport::new("mc_gradient_within_4_sigma", cases, grad_dev, grad_dev <= 1.0),
        PropertyReport::new(
            "mc_determinism",
            2,
            if deterministic { 0.0 } else { 1.0 },
            deterministic,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!("gradient".parse::<Suite>().unwrap(), Suite::Gradient);
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn quadrature_oracle_matches_closed_form_on_hand_case() {
        let dom = DomainMeasure::new(0.0, 1.0, 1.0).unwrap();
        let target = Target::affine(1.0, 0.0, &dom);
        let theta = ParamVector::<f64>::width1(1.0, 0.0, 1.0, 1.0);
        let r = quadrature_risk(&theta, &target, &dom).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let g = quadrature_gradient(&theta, &target, &dom).unwrap();
        for (got, want) in g.iter().zip([1.0, 2.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12, "{g:?}");
        }
    }

    #[test]
    fn gradient_suite_passes_quickly() {
        for rep in gradient_suite(1, 25) {
            assert!(rep.pass, "{}: {}", rep.name, rep.max_deviation);
        }
    }

    #[test]
    fn smoothing_suite_passes_quickly() {
        for rep in smoothing_suite(1, 8) {
            assert!(rep.pass, "{}: {}", rep.name, rep.max_deviation);
        }
    }

    #[test]
    fn theory_suite_passes_quickly() {
        for rep in theory_suite(1, 500) {
            assert!(rep.pass, "{}: {}", rep.name, rep.max_deviation);
        }
    }

    #[test]
    fn flow_suite_passes_quickly() {
        for rep in flow_suite(1, 2) {
            assert!(rep.pass, "{}: {}", rep.name, rep.max_deviation);
        }
    }

    #[test]
    fn highdim_suite_passes_quickly() {
        for rep in highdim_suite(1, 10) {
            assert!(rep.pass, "{}: {}", rep.name, rep.max_deviation);
        }
    }

    #[test]
    fn fd_check_reports_excluded_points() {
        let dom = DomainMeasure::new(0.0, 1.0, 1.0).unwrap();
        let target = Target::affine(1.0, 0.0, &dom);
        // w = b = 0 with v != 0 and positive risk: excluded, not failed.
        let shape = NetworkShape::new(1, 2);
        let theta = ParamVector::new(shape, vec![1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.3]).unwrap();
        match fd_check(&theta, &target, &dom, 1e-6).unwrap() {
            FdVerdict::ExcludedNondifferentiable => {}
            other => panic!("expected exclusion, got {other:?}"),
        }
    }
}
