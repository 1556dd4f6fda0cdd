//! Acceptance suite: every quantitative gate the library is held to, one test
//! per criterion, each printing a single PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! The flow-based criteria (3–6) share one fixture of twenty monitored runs.
//! Heavy criteria serialize on a mutex so the per-criterion runtime budgets
//! are measured without interference.

use reluflow::exact_risk;
use reluflow::flow::{
    boundedness_check, energy_residual, integrate, limsup_bound_check, lyapunov_check,
    FlowConfig, Trajectory,
};
use reluflow::model::{DomainMeasure, NetworkShape, ParamVector, Target};
use reluflow::rng::{derive_seed, standard_normal};
use reluflow::theory::{classify_terminal_risk, critical_ladder, uniform_error, RungLabel};
use reluflow::verify::{
    euler_flow, random_flow_instance, run_flow_case, run_suite, Instance, PropertyReport, Suite,
};
use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

static GATE: Mutex<()> = Mutex::new(());
static FLOW_FIXTURE: OnceLock<Vec<(Instance, Trajectory<f64>)>> = OnceLock::new();

const FLOW_SEED: u64 = 1;
const WIDTH1_SEED: u64 = 2024;

fn heavy<T>(f: impl FnOnce() -> T) -> T {
    let _guard = GATE.lock().unwrap_or_else(|e| e.into_inner());
    f()
}

fn report_line(id: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {id:02} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn flow_fixture() -> &'static [(Instance, Trajectory<f64>)] {
    FLOW_FIXTURE.get_or_init(|| {
        (0..20u64)
            .map(|case| {
                let inst = random_flow_instance(FLOW_SEED, case);
                let traj = run_flow_case(&inst, 100.0).expect("fixture run failed");
                (inst, traj)
            })
            .collect()
    })
}

fn property<'a>(reports: &'a [PropertyReport], name: &str) -> &'a PropertyReport {
    reports
        .iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("missing property {name}"))
}

#[test]
fn criterion_01_gradient_correctness() {
    heavy(|| {
        let start = Instant::now();
        let reports = run_suite(Suite::Gradient, FLOW_SEED, 500);
        let elapsed = start.elapsed();
        let quad = property(&reports, "gradient_vs_quadrature_rel");
        let risk = property(&reports, "risk_vs_quadrature_rel");
        let fd = property(&reports, "finite_difference_scaled");
        let pass =
            quad.pass && risk.pass && fd.pass && elapsed.as_secs_f64() < 30.0;
        report_line(
            1,
            "gradient correctness",
            pass,
            &format!(
                "500 instances: gradient vs quadrature rel {:.2e} (tol 1e-9), risk rel {:.2e} \
                 (tol 1e-10), finite differences {:.2e}x tolerance, runtime {:.2?} (budget 30 s)",
                quad.max_deviation, risk.max_deviation, fd.max_deviation, elapsed
            ),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_02_smoothed_gradient_limit() {
    heavy(|| {
        let reports = run_suite(Suite::Smoothing, FLOW_SEED, 100);
        let risk_mono = property(&reports, "risk_error_monotone");
        let grad_mono = property(&reports, "gradient_error_monotone");
        let limit = property(&reports, "gradient_limit_scaled");
        let pass = risk_mono.pass && grad_mono.pass && limit.pass;
        report_line(
            2,
            "smoothed-gradient limit",
            pass,
            &format!(
                "100 instances, r in {{10, 100, 1000, 10000}}: worst monotonicity defects \
                 {:.2e} / {:.2e} (slack 1e-12), final gradient error {:.2e}x the 1e-2·(1+|G|) bound",
                risk_mono.max_deviation, grad_mono.max_deviation, limit.max_deviation
            ),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_03_balancedness_conservation() {
    heavy(|| {
        let worst = flow_fixture()
            .iter()
            .map(|(_, traj)| traj.max_balancedness_drift())
            .fold(0.0f64, f64::max);
        let pass = worst <= 1e-8;
        report_line(
            3,
            "balancedness conservation",
            pass,
            &format!("20 flows to t = 100: max relative W_i drift {worst:.2e} (tol 1e-8)"),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_04_energy_identity() {
    heavy(|| {
        let worst = flow_fixture()
            .iter()
            .map(|(_, traj)| energy_residual(traj) / (1e-6 * (1.0 + traj.risk[0])))
            .fold(0.0f64, f64::max);
        let pass = worst <= 1.0;
        report_line(
            4,
            "energy identity",
            pass,
            &format!(
                "20 flows: max residual {worst:.2e}x the 1e-6·(1+L(theta_0)) tolerance"
            ),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_05_lyapunov_and_boundedness() {
    heavy(|| {
        let mut lyap_worst = 0.0f64;
        let mut bounded_fails = 0usize;
        for (inst, traj) in flow_fixture() {
            let chk = lyapunov_check(traj, &inst.target, &inst.dom);
            lyap_worst =
                lyap_worst.max(chk.max_violation / (1e-6 * (1.0 + traj.lyapunov[0])));
            if !boundedness_check(traj, &inst.target, &inst.dom).ok {
                bounded_fails += 1;
            }
        }
        let pass = lyap_worst <= 1.0 && bounded_fails == 0;
        report_line(
            5,
            "Lyapunov bound and norm boundedness",
            pass,
            &format!(
                "20 flows with xi = target mean: worst Lyapunov violation {lyap_worst:.2e}x \
                 the 1e-6 scale, {bounded_fails} boundedness failures"
            ),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_06_constant_approximation_ceiling() {
    heavy(|| {
        let mut worst = f64::NEG_INFINITY;
        for (inst, traj) in flow_fixture() {
            let chk = limsup_bound_check(traj, &inst.target, &inst.dom);
            worst = worst.max(chk.terminal_risk - chk.const_bound);
        }
        let pass = worst <= 1e-8;
        report_line(
            6,
            "constant-approximation ceiling",
            pass,
            &format!(
                "20 flows: max terminal risk minus rho·alpha²(b-a)³/12 is {worst:.2e} (tol 1e-8)"
            ),
        );
        assert!(pass);
    });
}

/// Rejection-sampled width-1 inits with risk below 1/12 − 0.01 on the unit
/// problem (f(x) = x on [0, 1], rho = 1).
fn width1_small_risk_inits(seed: u64, count: usize) -> Vec<ParamVector<f64>> {
    let dom = DomainMeasure::unit();
    let target = Target::affine(1.0, 0.0, &dom);
    let mut out = Vec::new();
    let mut draw = 0u64;
    while out.len() < count {
        let s = derive_seed(seed, draw);
        draw += 1;
        let theta = ParamVector::width1(
            standard_normal::<f64>(s, 0),
            standard_normal::<f64>(s, 1),
            standard_normal::<f64>(s, 2),
            standard_normal::<f64>(s, 3),
        );
        let risk = exact_risk::risk(&theta, &target, &dom).unwrap();
        if risk < 1.0 / 12.0 - 0.01 {
            out.push(theta);
        }
    }
    out
}

#[test]
fn criterion_07_width1_global_convergence() {
    heavy(|| {
        let start = Instant::now();
        let dom = DomainMeasure::unit();
        let target = Target::affine(1.0, 0.0, &dom);
        // Horizon calibrated against the fixed-step Euler oracle: every init
        // reaches risk < 1e-8 by t = 1000; the uniform-error proxy needs the
        // boundary kink at ~2.3/t to fall below 1e-3, hence t_end = 4000.
        let t_end = 4000.0;
        let cfg = FlowConfig {
            dt_max: 0.02,
            ..FlowConfig::new(t_end)
        };
        let inits = width1_small_risk_inits(WIDTH1_SEED, 10);
        let mut worst_risk = 0.0f64;
        let mut worst_sup = 0.0f64;
        for theta in &inits {
            let l0 = exact_risk::risk(theta, &target, &dom).unwrap();
            assert!(l0 < 1.0 / 12.0 - 0.01);
            let traj = integrate(theta, &target, &dom, &cfg, None).unwrap();
            worst_risk = worst_risk.max(traj.terminal_risk());
            worst_sup =
                worst_sup.max(uniform_error(traj.terminal_params(), &target, &dom).unwrap());
        }
        // Euler-oracle spot check on the first init.
        let euler = euler_flow(&inits[0], &target, &dom, 1000.0, 1e-3).unwrap();
        let euler_risk = exact_risk::risk(&euler, &target, &dom).unwrap();
        let elapsed = start.elapsed();
        let pass = worst_risk < 1e-8
            && worst_sup < 1e-3
            && euler_risk < 1e-8
            && elapsed.as_secs_f64() < 120.0;
        report_line(
            7,
            "width-1 global convergence",
            pass,
            &format!(
                "10 inits with L(theta_0) < 1/12 - 0.01: max terminal risk {worst_risk:.2e} \
                 (tol 1e-8), max uniform error {worst_sup:.2e} (tol 1e-3), Euler oracle risk \
                 at t = 1000 is {euler_risk:.2e}, runtime {elapsed:.2?} (budget 2 min)"
            ),
        );
        assert!(pass);
    });
}

#[test]
fn criterion_08_ladder_classification() {
    heavy(|| {
        let dom = DomainMeasure::unit();
        let target = Target::affine(1.0, 0.0, &dom);
        let mut pass = true;
        let mut detail = String::new();
        for hidden in [2usize, 4] {
            let ladder = critical_ladder(hidden, 1.0, 0.0, 1.0, 1.0);
            let tol = ladder.min_gap() / 4.0;
            let mut hist: BTreeMap<String, usize> = BTreeMap::new();
            let mut non_converged = 0usize;
            for case in 0..50u64 {
                let s = derive_seed(9000 + hidden as u64, case);
                let shape = NetworkShape::new(1, hidden);
                let scale = 1.0 / (hidden as f64).sqrt();
                let values: Vec<f64> = (0..shape.dim())
                    .map(|k| scale * standard_normal::<f64>(s, k as u64))
                    .collect();
                let theta = ParamVector::new(shape, values).unwrap();
                let cfg = FlowConfig {
                    dt_max: 0.02,
                    ..FlowConfig::new(1000.0)
                };
                let traj = integrate(&theta, &target, &dom, &cfg, None).unwrap();
                let grad_norm = *traj.grad_norm.last().unwrap();
                let bounded = boundedness_check(&traj, &target, &dom).ok;
                match classify_terminal_risk(traj.terminal_risk(), &ladder, tol).unwrap() {
                    Some(rung) => {
                        let label = match rung.label {
                            RungLabel::Critical(n) => format!("n={n}"),
                            RungLabel::Zero => "ZERO".to_string(),
                        };
                        *hist.entry(label).or_insert(0) += 1;
                    }
                    None if grad_norm < 1e-6 && bounded => {
                        // Converged off the ladder: a genuine failure.
                        pass = false;
                        *hist.entry("NONE-converged".to_string()).or_insert(0) += 1;
                    }
                    None => non_converged += 1,
                }
            }
            detail.push_str(&format!(
                "H = {hidden}: tol {tol:.2e}, rung histogram {hist:?}, \
                 non-converged-at-horizon {non_converged}; "
            ));
        }
        report_line(8, "critical-risk ladder classification", pass, &detail);
        assert!(pass);
    });
}

#[test]
fn criterion_09_small_risk_structure() {
    heavy(|| {
        let reports = run_suite(Suite::Theory, FLOW_SEED, 10_000);
        let sweep = property(&reports, "small_risk_structure");
        report_line(
            9,
            "small-risk structure",
            sweep.pass,
            &format!(
                "10000 width-1 parameters: {} violations of the sign, activity, and \
                 slope-product bounds among the small-risk cases",
                sweep.max_deviation
            ),
        );
        assert!(sweep.pass);
    });
}

#[test]
fn criterion_10_monte_carlo_cross_validation() {
    heavy(|| {
        let reports = run_suite(Suite::Highdim, FLOW_SEED, 100);
        let risk = property(&reports, "mc_risk_within_4_sigma");
        let grad = property(&reports, "mc_gradient_within_4_sigma");
        let det = property(&reports, "mc_determinism");
        let pass = risk.pass && grad.pass && det.pass;
        report_line(
            10,
            "Monte-Carlo cross-validation",
            pass,
            &format!(
                "100 instances: worst risk deviation {:.2} sigma-units of 4, worst gradient \
                 component {:.2}, deterministic under fixed seed: {}",
                4.0 * risk.max_deviation,
                4.0 * grad.max_deviation,
                det.pass
            ),
        );
        assert!(pass);
    });
}
