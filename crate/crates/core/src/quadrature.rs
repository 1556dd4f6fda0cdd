//! Gauss–Legendre panels with adaptive bisection.
//!
//! A panel is accepted when the 16-point and 32-point values agree to the
//! panel tolerance, otherwise it is split. Nodes and weights are computed once
//! by Newton iteration on the Legendre recurrence and cached.

use crate::scalar::{real, Scalar};
use std::sync::OnceLock;

/// Panel acceptance threshold for the deterministic inner integrals.
pub const DEFAULT_PANEL_TOL: f64 = 1e-13;
/// Bisection depth cap; 2^48 subdivisions is far past f64 resolution.
pub const MAX_DEPTH: u32 = 48;

/// Nodes and weights on [-1, 1].
struct GlRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn build_rule(n: usize) -> GlRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        weights[k] = w;
        nodes[n - 1 - k] = x;
        weights[n - 1 - k] = w;
    }
    GlRule { nodes, weights }
}

fn rule16() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| build_rule(16))
}

fn rule32() -> &'static GlRule {
    static RULE: OnceLock<GlRule> = OnceLock::new();
    RULE.get_or_init(|| build_rule(32))
}

struct Panels<R> {
    nodes16: Vec<(R, R)>,
    nodes32: Vec<(R, R)>,
}

impl<R: Scalar> Panels<R> {
    fn new() -> Self {
        let conv = |rule: &GlRule| {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| (real::<R>(x), real::<R>(w)))
                .collect()
        };
        Self {
            nodes16: conv(rule16()),
            nodes32: conv(rule32()),
        }
    }

    fn apply(&self, nodes: &[(R, R)], f: &mut impl FnMut(R) -> R, lo: R, hi: R) -> R {
        let half = real::<R>(0.5);
        let mid = half * (lo + hi);
        let rad = half * (hi - lo);
        let mut acc = R::zero();
        for &(x, w) in nodes {
            acc = acc + w * f(mid + rad * x);
        }
        acc * rad
    }
}

/// Adaptive 16/32-point Gauss–Legendre integration of `f` over `[lo, hi]`.
pub fn adaptive_gl<R: Scalar>(mut f: impl FnMut(R) -> R, lo: R, hi: R, panel_tol: R) -> R {
    if !(hi > lo) {
        return R::zero();
    }
    let panels = Panels::<R>::new();
    let mut total = R::zero();
    let mut stack = vec![(lo, hi, 0u32)];
    while let Some((a, b, depth)) = stack.pop() {
        let coarse = panels.apply(&panels.nodes16, &mut f, a, b);
        let fine = panels.apply(&panels.nodes32, &mut f, a, b);
        if (fine - coarse).abs() <= panel_tol || depth >= MAX_DEPTH {
            total = total + fine;
        } else {
            let mid = real::<R>(0.5) * (a + b);
            stack.push((a, mid, depth + 1));
            stack.push((mid, b, depth + 1));
        }
    }
    total
}

/// Adaptive integration over a union of panels given by sorted nodes.
pub fn adaptive_gl_refined<R: Scalar>(
    mut f: impl FnMut(R) -> R,
    nodes: &[R],
    panel_tol: R,
) -> R {
    let mut total = R::zero();
    for seg in nodes.windows(2) {
        total = total + adaptive_gl(&mut f, seg[0], seg[1], panel_tol);
    }
    total
}
