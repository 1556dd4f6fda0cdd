//! Closed-form quantities the flow is measured against: the best constant
//! risk, the critical-risk ladder for affine targets, small-risk structure of
//! width-1 networks, and the uniform approximation error.

use crate::model::{refinement_nodes, DomainMeasure, ModelError, ParamVector, Target};
use crate::poly::int_affine_sq;
use crate::scalar::{real, Scalar};
use thiserror::Error;

/// Risk of the constant realization `x ↦ ξ`: `ρ ∫ (f − ξ)² dx`.
pub fn constant_risk<R: Scalar>(target: &Target<R>, dom: &DomainMeasure<R>, xi: R) -> R {
    let raw = target.pieces().iter().fold(R::zero(), |acc, p| {
        acc + int_affine_sq(p.slope, p.intercept - xi, p.lo, p.hi)
    });
    (raw * dom.rho()).max(R::zero())
}

/// Minimum risk over constant realizations, attained at the target mean.
pub fn best_constant_risk<R: Scalar>(target: &Target<R>, dom: &DomainMeasure<R>) -> R {
    constant_risk(target, dom, target.mean())
}

/// Label of a ladder rung: an even critical index, or the global minimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RungLabel {
    Critical(u32),
    Zero,
}

impl std::fmt::Display for RungLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RungLabel::Critical(n) => write!(f, "{n}"),
            RungLabel::Zero => write!(f, "ZERO"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rung<R> {
    pub label: RungLabel,
    pub value: R,
}

/// The finite set of risks attainable at critical points for an affine
/// target: `ρα²(b−a)³ / (12(n+1)⁴)` over even `n ≤ 2⌊H/2⌋`, plus zero.
#[derive(Clone, Debug)]
pub struct RiskLadder<R> {
    rungs: Vec<Rung<R>>,
    hidden: usize,
}

impl<R: Scalar> RiskLadder<R> {
    /// Rungs in strictly decreasing value order (zero last).
    pub fn rungs(&self) -> &[Rung<R>] {
        &self.rungs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Smallest positive rung, `ρα²(b−a)³ / (12(2⌊H/2⌋+1)⁴)` when α ≠ 0.
    pub fn min_positive(&self) -> Option<R> {
        self.rungs
            .iter()
            .rev()
            .find(|r| r.value > R::zero())
            .map(|r| r.value)
    }

    /// Smallest gap between consecutive rung values.
    pub fn min_gap(&self) -> R {
        let mut gap = R::infinity();
        for pair in self.rungs.windows(2) {
            gap = gap.min(pair[0].value - pair[1].value);
        }
        gap
    }

    /// Classification tolerance `min(1e−6, gap/4)` that keeps rungs disjoint.
    pub fn default_tol(&self) -> R {
        let quarter_gap = self.min_gap() * real::<R>(0.25);
        real::<R>(1e-6).min(quarter_gap)
    }
}

/// Build the critical-risk ladder for the affine target `αx + β` on `[a, b]`
/// with density `ρ`.
pub fn critical_ladder<R: Scalar>(hidden: usize, alpha: R, a: R, b: R, rho: R) -> RiskLadder<R> {
    assert!(hidden >= 1, "hidden width must be positive");
    assert!(b > a, "ladder requires b > a");
    assert!(rho > R::zero(), "ladder requires rho > 0");
    let mut rungs = Vec::new();
    if alpha != R::zero() {
        let width = b - a;
        let twelve = real::<R>(12.0);
        let scale = rho * alpha * alpha * width * width * width / twelve;
        let n_max = 2 * (hidden / 2);
        let mut n = 0usize;
        while n <= n_max {
            let np1 = real::<R>((n + 1) as f64);
            rungs.push(Rung {
                label: RungLabel::Critical(n as u32),
                value: scale / (np1 * np1 * np1 * np1),
            });
            n += 2;
        }
    }
    rungs.push(Rung {
        label: RungLabel::Zero,
        value: R::zero(),
    });
    RiskLadder { rungs, hidden }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("tolerance must be positive, got {0}")]
    BadTol(f64),
    #[error("value {value} is within tolerance of rungs {first} and {second}")]
    Ambiguous {
        value: f64,
        first: RungLabel,
        second: RungLabel,
    },
}

/// The unique rung within `tol` of `value`, or `None` when no rung matches.
/// Two matching rungs (tolerance wider than half the rung gap) is an error.
pub fn classify_terminal_risk<R: Scalar>(
    value: R,
    ladder: &RiskLadder<R>,
    tol: R,
) -> Result<Option<Rung<R>>, ClassifyError> {
    if !(tol > R::zero()) {
        return Err(ClassifyError::BadTol(crate::scalar::as_f64(tol)));
    }
    let mut hits = ladder
        .rungs()
        .iter()
        .filter(|r| (r.value - value).abs() <= tol);
    match (hits.next(), hits.next()) {
        (None, _) => Ok(None),
        (Some(r), None) => Ok(Some(*r)),
        (Some(r1), Some(r2)) => Err(ClassifyError::Ambiguous {
            value: crate::scalar::as_f64(value),
            first: r1.label,
            second: r2.label,
        }),
    }
}

/// Structural facts that hold for width-1 networks with small risk: the
/// realization slope has the sign of the target slope, the neuron is active
/// somewhere, and |w·v| is bounded below by a constructive expression.
#[derive(Clone, Copy, Debug)]
pub struct SmallRiskReport<R> {
    pub risk: R,
    /// `ρα²(b−a)³/12`; the sign condition applies below this.
    pub threshold: R,
    /// `α·w·v > 0`; `None` when the risk is not below the threshold.
    pub sign_ok: Option<bool>,
    /// `max{w·a + b, w·b + b} > 0`; `None` when the risk is not below the
    /// best constant risk.
    pub active_ok: Option<bool>,
    pub slope_product: R,
    /// `(√m − √risk)/√(ρ(b−a)³)` with `m` the best constant risk; `None`
    /// when the risk is not below `m`.
    pub slope_lower_bound: Option<R>,
}

/// Small-risk diagnostics for a width-1 network against the affine target
/// `αx + β`.
pub fn small_risk_diagnostics<R: Scalar>(
    theta: &ParamVector<R>,
    alpha: R,
    beta: R,
    dom: &DomainMeasure<R>,
) -> Result<SmallRiskReport<R>, ModelError> {
    if theta.shape().hidden() != 1 {
        return Err(ModelError::WidthNot1(theta.shape().hidden()));
    }
    let target = Target::affine(alpha, beta, dom);
    let risk = crate::exact_risk::risk(theta, &target, dom)?;
    let width = dom.width();
    let twelve = real::<R>(12.0);
    let threshold = dom.rho() * alpha * alpha * width * width * width / twelve;
    let m = best_constant_risk(&target, dom);
    let w = theta.weight(0, 0);
    let b = theta.bias(0);
    let v = theta.output_weight(0);
    let sign_ok = (risk < threshold).then(|| alpha * w * v > R::zero());
    let active_ok = (risk < m).then(|| (w * dom.a() + b).max(w * dom.b() + b) > R::zero());
    let slope_lower_bound = (risk < m)
        .then(|| (m.sqrt() - risk.sqrt()) / (dom.rho() * width * width * width).sqrt());
    Ok(SmallRiskReport {
        risk,
        threshold,
        sign_ok,
        active_ok,
        slope_product: (w * v).abs(),
        slope_lower_bound,
    })
}

/// Exact `sup_{x ∈ [a,b]} |N_θ(x) − f(x)|`; both functions are piecewise
/// affine, so the sup is attained at a refinement node.
pub fn uniform_error<R: Scalar>(
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
    let mut sup = R::zero();
    for &x in &nodes {
        sup = sup.max((theta.realization_1d(x) - target.value(x)).abs());
    }
    Ok(sup)
}
