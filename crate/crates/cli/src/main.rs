//! Command-line laboratory for shallow ReLU gradient flows.
//!
//! Exit codes: 0 success / all checks pass, 1 check or property failure,
//! 2 usage or configuration error, 3 numeric (solver) failure.

// Negated float comparisons are NaN-rejecting validity guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod simulate;

use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use reluflow::flow::FlowError;
use reluflow::theory::{critical_ladder, RungLabel};
use reluflow::verify::{run_suite, Suite};
use std::path::PathBuf;
use std::process::ExitCode;

/// Wrapper marking integrator failures so `main` can map them to exit 3.
#[derive(Debug)]
pub struct SolverFailure(pub FlowError);

impl std::fmt::Display for SolverFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "solver failure: {}", self.0)
    }
}

impl std::error::Error for SolverFailure {}

#[derive(Parser)]
#[command(
    name = "reluflow",
    about = "Exact gradient-flow dynamics of shallow ReLU networks on an interval"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a configured flow; writes trajectory.csv and summary.txt.
    Simulate {
        /// Path to a TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the critical-risk ladder for an affine target.
    Ladder {
        #[arg(long)]
        hidden: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        a: f64,
        #[arg(long, default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
    },
    /// Run a property suite and print a TSV report.
    Verify {
        /// gradient, smoothing, flow, theory, highdim, or all.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Cases per suite; 0 uses the suite default.
        #[arg(long, default_value_t = 0)]
        cases: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Simulate { config } => cmd_simulate(&config),
        Cmd::Ladder {
            hidden,
            alpha,
            a,
            b,
            rho,
        } => cmd_ladder(hidden, alpha, a, b, rho),
        Cmd::Verify { suite, seed, cases } => cmd_verify(&suite, seed, cases),
    }
}

fn cmd_simulate(path: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match ExperimentConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: config parse: {e}");
            return ExitCode::from(2);
        }
    };
    let exp = match cfg.build() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: config: {e}");
            return ExitCode::from(2);
        }
    };
    match simulate::run(&exp) {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "check {}: {} ({})",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            println!(
                "wrote {} and {}",
                exp.out_dir.join("trajectory.csv").display(),
                exp.out_dir.join("summary.txt").display()
            );
            if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            if e.is::<SolverFailure>() {
                eprintln!("error: {e}");
                ExitCode::from(3)
            } else {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        }
    }
}

fn cmd_ladder(hidden: usize, alpha: f64, a: f64, b: f64, rho: f64) -> ExitCode {
    if hidden == 0 || !(b > a) || !(rho > 0.0) {
        eprintln!("error: ladder requires hidden >= 1, b > a, rho > 0");
        return ExitCode::from(2);
    }
    let ladder = critical_ladder(hidden, alpha, a, b, rho);
    println!("n\trisk");
    for rung in ladder.rungs() {
        match rung.label {
            RungLabel::Critical(n) => println!("{n}\t{:.16e}", rung.value),
            RungLabel::Zero => println!("ZERO\t{:.16e}", rung.value),
        }
    }
    match ladder.min_positive() {
        Some(v) => println!("min positive rung: {v:.16e}"),
        None => println!("min positive rung: none (alpha = 0)"),
    }
    ExitCode::SUCCESS
}

fn cmd_verify(suite: &str, seed: u64, cases: usize) -> ExitCode {
    let suite: Suite = match suite.parse() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let reports = run_suite(suite, seed, cases);
    println!("property\tcases\tmax_deviation\tverdict");
    let mut all = true;
    for r in &reports {
        println!(
            "{}\t{}\t{:.6e}\t{}",
            r.name,
            r.cases,
            r.max_deviation,
            if r.pass { "PASS" } else { "FAIL" }
        );
        all &= r.pass;
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
