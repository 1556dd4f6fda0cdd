//! Run one configured flow, write `trajectory.csv` and `summary.txt`, and
//! evaluate the requested checks.

use crate::config::Experiment;
use anyhow::{Context, Result};
use reluflow::flow::{
    boundedness_check, energy_residual, integrate, limsup_bound_check, lyapunov_check,
    monotonicity_defect, Trajectory,
};
use reluflow::theory::{classify_terminal_risk, critical_ladder, RungLabel};
use std::fmt::Write as _;
use std::fs;

/// 17 significant digits: lossless decimal round-trip for f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

pub struct SimulationReport {
    pub checks: Vec<CheckOutcome>,
    pub all_pass: bool,
}

pub fn run(exp: &Experiment) -> Result<SimulationReport> {
    let traj = integrate(&exp.theta0, &exp.target, &exp.dom, &exp.flow, exp.xi).map_err(|e| {
        // Numeric breakdowns get the solver exit code; anything else is a
        // configuration problem that slipped past validation.
        match e {
            reluflow::flow::FlowError::StepUnderflow { .. }
            | reluflow::flow::FlowError::NonFinite { .. } => {
                anyhow::Error::new(crate::SolverFailure(e))
            }
            other => anyhow::Error::new(other),
        }
    })?;
    fs::create_dir_all(&exp.out_dir)
        .with_context(|| format!("creating output directory {}", exp.out_dir.display()))?;
    write_csv(exp, &traj)?;
    let checks = run_checks(exp, &traj);
    let all_pass = checks.iter().all(|c| c.pass);
    write_summary(exp, &traj, &checks)?;
    Ok(SimulationReport { checks, all_pass })
}

fn write_csv(exp: &Experiment, traj: &Trajectory<f64>) -> Result<()> {
    let hidden = exp.theta0.shape().hidden();
    let dim = exp.theta0.shape().dim();
    let mut out = String::new();
    out.push('t');
    for k in 1..=dim {
        write!(out, ",theta_{k}").unwrap();
    }
    out.push_str(",risk,grad_norm");
    for i in 1..=hidden {
        write!(out, ",W_{i}").unwrap();
    }
    out.push_str(",V\n");
    for (row, (&step, theta)) in traj
        .param_steps
        .iter()
        .zip(&traj.params)
        .enumerate()
    {
        let last = row + 1 == traj.params.len();
        if row % exp.out_stride != 0 && !last {
            continue;
        }
        out.push_str(&fmt17(traj.times[step]));
        for &x in theta.values() {
            out.push(',');
            out.push_str(&fmt17(x));
        }
        out.push(',');
        out.push_str(&fmt17(traj.risk[step]));
        out.push(',');
        out.push_str(&fmt17(traj.grad_norm[step]));
        for &w in &traj.balancedness[step] {
            out.push(',');
            out.push_str(&fmt17(w));
        }
        out.push(',');
        out.push_str(&fmt17(traj.lyapunov[step]));
        out.push('\n');
    }
    let path = exp.out_dir.join("trajectory.csv");
    fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn run_checks(exp: &Experiment, traj: &Trajectory<f64>) -> Vec<CheckOutcome> {
    let l0 = traj.risk[0];
    exp.checks
        .iter()
        .map(|name| match name.as_str() {
            "conservation" => {
                let drift = traj.max_balancedness_drift();
                CheckOutcome {
                    name: name.clone(),
                    pass: drift <= 1e-8,
                    detail: format!("max relative balancedness drift {drift:.3e} (tol 1e-8)"),
                }
            }
            "energy" => {
                let res = energy_residual(traj);
                let tol = 1e-6 * (1.0 + l0);
                CheckOutcome {
                    name: name.clone(),
                    pass: res <= tol,
                    detail: format!("energy identity residual {res:.3e} (tol {tol:.3e})"),
                }
            }
            "lyapunov" => {
                let chk = lyapunov_check(traj, &exp.target, &exp.dom);
                CheckOutcome {
                    name: name.clone(),
                    pass: chk.ok,
                    detail: format!("max Lyapunov bound violation {:.3e}", chk.max_violation),
                }
            }
            "boundedness" => {
                let chk = boundedness_check(traj, &exp.target, &exp.dom);
                CheckOutcome {
                    name: name.clone(),
                    pass: chk.ok,
                    detail: match chk.max_norm_while_above {
                        Some(m) => format!("max norm {m:.6e} vs bound {:.6e}", chk.bound),
                        None => "risk below the constant level from the start".to_string(),
                    },
                }
            }
            "limsup" => {
                let chk = limsup_bound_check(traj, &exp.target, &exp.dom);
                CheckOutcome {
                    name: name.clone(),
                    pass: chk.ok,
                    detail: format!(
                        "terminal risk {:.6e} vs constant-fit bound {:.6e}",
                        chk.terminal_risk, chk.const_bound
                    ),
                }
            }
            "monotone" => {
                let defect = monotonicity_defect(traj);
                let tol = 1e-10 * (1.0 + l0);
                CheckOutcome {
                    name: name.clone(),
                    pass: defect <= tol,
                    detail: format!("max risk increase {defect:.3e} (tol {tol:.3e})"),
                }
            }
            other => CheckOutcome {
                name: other.to_string(),
                pass: false,
                detail: "unknown check".to_string(),
            },
        })
        .collect()
}

fn write_summary(
    exp: &Experiment,
    traj: &Trajectory<f64>,
    checks: &[CheckOutcome],
) -> Result<()> {
    let mut s = String::new();
    let terminal = traj.terminal_risk();
    writeln!(s, "t_end: {}", fmt17(*traj.times.last().unwrap())).unwrap();
    writeln!(s, "terminal_risk: {}", fmt17(terminal)).unwrap();
    writeln!(
        s,
        "terminal_grad_norm: {}",
        fmt17(*traj.grad_norm.last().unwrap())
    )
    .unwrap();
    writeln!(s, "steps: {}", traj.steps).unwrap();
    writeln!(s, "events: {}", traj.events).unwrap();
    writeln!(s, "init: {}", exp.init_desc).unwrap();
    writeln!(s, "lyapunov_xi: {}", fmt17(traj.xi)).unwrap();
    match exp.target.as_affine() {
        Some((alpha, _)) => {
            let ladder = critical_ladder(
                exp.theta0.shape().hidden(),
                alpha,
                exp.dom.a(),
                exp.dom.b(),
                exp.dom.rho(),
            );
            let rung = classify_terminal_risk(terminal, &ladder, ladder.default_tol());
            let text = match rung {
                Ok(Some(r)) => match r.label {
                    RungLabel::Critical(n) => format!("n={n} (value {})", fmt17(r.value)),
                    RungLabel::Zero => "ZERO".to_string(),
                },
                Ok(None) => "NONE".to_string(),
                Err(e) => format!("error: {e}"),
            };
            writeln!(s, "ladder_rung: {text}").unwrap();
        }
        None => {
            writeln!(s, "ladder_rung: not-applicable (non-affine target)").unwrap();
        }
    }
    for c in checks {
        writeln!(
            s,
            "check {}: {} ({})",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        )
        .unwrap();
    }
    let overall = checks.iter().all(|c| c.pass);
    writeln!(s, "overall: {}", if overall { "PASS" } else { "FAIL" }).unwrap();
    let path = exp.out_dir.join("summary.txt");
    fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
