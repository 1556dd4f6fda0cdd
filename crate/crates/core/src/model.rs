//! Network parametrization, realization evaluation, active regions, and the
//! algebraic quantities that gradient flow conserves or controls.
//!
//! A parameter vector `θ ∈ ℝ^dim` with `dim = d·H + 2H + 1` is laid out flat as
//! `[w_{1,1}, …, w_{H,d}, b_1, …, b_H, v_1, …, v_H, c]` and realizes
//!
//! ```text
//! N_θ(x) = c + Σ_i v_i · max{ b_i + Σ_j w_{i,j} x_j, 0 }.
//! ```
//!
//! Indices are 0-based in code; the accessor methods are the single source of
//! truth for the layout.

use crate::scalar::{as_f64, norm, norm_sq, real, Scalar};
use thiserror::Error;

/// Kinks closer than this (absolute) are merged into one breakpoint.
pub const KINK_DEDUP_TOL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("operation requires input dimension 1, got d = {0}")]
    DimensionNot1(usize),
    #[error("operation requires hidden width 1, got H = {0}")]
    WidthNot1(usize),
    #[error("parameter vector has length {got}, shape requires {want}")]
    BadLength { got: usize, want: usize },
    #[error("domain requires b > a, got [{a}, {b}]")]
    EmptyDomain { a: f64, b: f64 },
    #[error("density must be positive and finite, got {0}")]
    BadDensity(f64),
    #[error("target needs at least one piece")]
    TargetEmpty,
    #[error("target piece {0} is degenerate or out of order")]
    TargetPieceOrder(usize),
    #[error("target pieces {0} and {1} do not meet continuously")]
    TargetDiscontinuous(usize, usize),
    #[error("target spans [{t_lo}, {t_hi}] but the domain is [{a}, {b}]")]
    TargetDomainMismatch { t_lo: f64, t_hi: f64, a: f64, b: f64 },
}

/// Layer sizes of a one-hidden-layer network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkShape {
    input_dim: usize,
    hidden: usize,
}

impl NetworkShape {
    pub fn new(input_dim: usize, hidden: usize) -> Self {
        assert!(input_dim >= 1, "input dimension must be positive");
        assert!(hidden >= 1, "hidden width must be positive");
        Self { input_dim, hidden }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Total parameter count `d·H + 2H + 1`.
    pub fn dim(&self) -> usize {
        self.input_dim * self.hidden + 2 * self.hidden + 1
    }
}

/// Flat parameter vector with named views into the weight/bias blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector<R> {
    shape: NetworkShape,
    values: Vec<R>,
}

impl<R: Scalar> ParamVector<R> {
    pub fn new(shape: NetworkShape, values: Vec<R>) -> Result<Self, ModelError> {
        if values.len() != shape.dim() {
            return Err(ModelError::BadLength {
                got: values.len(),
                want: shape.dim(),
            });
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: NetworkShape) -> Self {
        Self {
            shape,
            values: vec![R::zero(); shape.dim()],
        }
    }

    /// Width-1 scalar network `(w, b, v, c)`.
    pub fn width1(w: R, b: R, v: R, c: R) -> Self {
        Self {
            shape: NetworkShape::new(1, 1),
            values: vec![w, b, v, c],
        }
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn values(&self) -> &[R] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [R] {
        &mut self.values
    }

    fn weight_idx(&self, i: usize, j: usize) -> usize {
        assert!(i < self.shape.hidden, "neuron index {i} out of range");
        assert!(j < self.shape.input_dim, "input index {j} out of range");
        i * self.shape.input_dim + j
    }

    fn bias_idx(&self, i: usize) -> usize {
        assert!(i < self.shape.hidden, "neuron index {i} out of range");
        self.shape.hidden * self.shape.input_dim + i
    }

    fn output_weight_idx(&self, i: usize) -> usize {
        assert!(i < self.shape.hidden, "neuron index {i} out of range");
        self.shape.hidden * (self.shape.input_dim + 1) + i
    }

    fn output_bias_idx(&self) -> usize {
        self.shape.dim() - 1
    }

    /// Inner weight `w_{i,j}`.
    pub fn weight(&self, i: usize, j: usize) -> R {
        self.values[self.weight_idx(i, j)]
    }

    /// Hidden bias `b_i`.
    pub fn bias(&self, i: usize) -> R {
        self.values[self.bias_idx(i)]
    }

    /// Outer weight `v_i`.
    pub fn output_weight(&self, i: usize) -> R {
        self.values[self.output_weight_idx(i)]
    }

    /// Outer bias `c`.
    pub fn output_bias(&self) -> R {
        self.values[self.output_bias_idx()]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, x: R) {
        let k = self.weight_idx(i, j);
        self.values[k] = x;
    }

    pub fn set_bias(&mut self, i: usize, x: R) {
        let k = self.bias_idx(i);
        self.values[k] = x;
    }

    pub fn set_output_weight(&mut self, i: usize, x: R) {
        let k = self.output_weight_idx(i);
        self.values[k] = x;
    }

    pub fn set_output_bias(&mut self, x: R) {
        let k = self.output_bias_idx();
        self.values[k] = x;
    }

    /// Preactivation `b_i + Σ_j w_{i,j} x_j` of neuron `i`.
    pub fn preactivation(&self, i: usize, x: &[R]) -> R {
        assert_eq!(x.len(), self.shape.input_dim, "input dimension mismatch");
        let mut acc = self.bias(i);
        for (j, &xj) in x.iter().enumerate() {
            acc = acc + self.weight(i, j) * xj;
        }
        acc
    }

    /// Network output `c + Σ_i v_i · max{b_i + Σ_j w_{i,j} x_j, 0}`.
    pub fn realization(&self, x: &[R]) -> R {
        let mut acc = self.output_bias();
        for i in 0..self.shape.hidden {
            let pre = self.preactivation(i, x);
            if pre > R::zero() {
                acc = acc + self.output_weight(i) * pre;
            }
        }
        acc
    }

    /// Scalar-input convenience for `d = 1`.
    pub fn realization_1d(&self, x: R) -> R {
        self.realization(std::slice::from_ref(&x))
    }

    /// Balancedness `W_i = Σ_j w_{i,j}² + b_i² − v_i²`, conserved along the flow.
    pub fn balancedness(&self, i: usize) -> R {
        let mut acc = self.bias(i) * self.bias(i);
        for j in 0..self.shape.input_dim {
            let w = self.weight(i, j);
            acc = acc + w * w;
        }
        let v = self.output_weight(i);
        acc - v * v
    }

    /// Lyapunov value `V_ξ = ‖θ‖² + (c − 2ξ)²`.
    pub fn lyapunov(&self, xi: R) -> R {
        let two = real::<R>(2.0);
        let shifted = self.output_bias() - two * xi;
        norm_sq(&self.values) + shifted * shifted
    }

    pub fn norm(&self) -> R {
        norm(&self.values)
    }

    pub fn norm_sq(&self) -> R {
        norm_sq(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Uniform measure `ρ·λ` on the box `[a, b]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DomainMeasure<R> {
    a: R,
    b: R,
    rho: R,
}

impl<R: Scalar> DomainMeasure<R> {
    pub fn new(a: R, b: R, rho: R) -> Result<Self, ModelError> {
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(ModelError::EmptyDomain {
                a: as_f64(a),
                b: as_f64(b),
            });
        }
        if !(rho > R::zero()) || !rho.is_finite() {
            return Err(ModelError::BadDensity(as_f64(rho)));
        }
        Ok(Self { a, b, rho })
    }

    /// The standard instance: `ρ = 1` on `[0, 1]`.
    pub fn unit() -> Self {
        Self {
            a: R::zero(),
            b: R::one(),
            rho: R::one(),
        }
    }

    pub fn a(&self) -> R {
        self.a
    }

    pub fn b(&self) -> R {
        self.b
    }

    pub fn rho(&self) -> R {
        self.rho
    }

    pub fn width(&self) -> R {
        self.b - self.a
    }

    /// Total mass `ρ(b−a)^d`.
    pub fn mass(&self, d: usize) -> R {
        self.rho * self.width().powi(d as i32)
    }
}

/// One affine piece of a target function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetPiece<R> {
    pub lo: R,
    pub hi: R,
    pub slope: R,
    pub intercept: R,
}

impl<R: Scalar> TargetPiece<R> {
    pub fn value(&self, x: R) -> R {
        self.slope * x + self.intercept
    }
}

/// Continuous piecewise-affine target on an interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Target<R> {
    pieces: Vec<TargetPiece<R>>,
}

impl<R: Scalar> Target<R> {
    /// The affine target `x ↦ slope·x + intercept` on the given domain.
    pub fn affine(slope: R, intercept: R, dom: &DomainMeasure<R>) -> Self {
        Self {
            pieces: vec![TargetPiece {
                lo: dom.a(),
                hi: dom.b(),
                slope,
                intercept,
            }],
        }
    }

    /// Build from ordered pieces; they must tile an interval contiguously and
    /// agree at shared endpoints.
    pub fn from_pieces(pieces: Vec<TargetPiece<R>>) -> Result<Self, ModelError> {
        if pieces.is_empty() {
            return Err(ModelError::TargetEmpty);
        }
        let tol = real::<R>(1e-9);
        for (k, p) in pieces.iter().enumerate() {
            if !(p.hi > p.lo) {
                return Err(ModelError::TargetPieceOrder(k));
            }
            if k + 1 < pieces.len() {
                let q = &pieces[k + 1];
                let gap = (q.lo - p.hi).abs();
                if gap > tol * (R::one() + p.hi.abs()) {
                    return Err(ModelError::TargetPieceOrder(k + 1));
                }
                let left = p.value(p.hi);
                let right = q.value(p.hi);
                if (left - right).abs() > tol * (R::one() + left.abs().max(right.abs())) {
                    return Err(ModelError::TargetDiscontinuous(k, k + 1));
                }
            }
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[TargetPiece<R>] {
        &self.pieces
    }

    pub fn lo(&self) -> R {
        self.pieces[0].lo
    }

    pub fn hi(&self) -> R {
        self.pieces[self.pieces.len() - 1].hi
    }

    /// The piece containing `x` (clamped to the span).
    pub fn piece_at(&self, x: R) -> &TargetPiece<R> {
        for p in &self.pieces {
            if x <= p.hi {
                return p;
            }
        }
        self.pieces.last().unwrap()
    }

    pub fn value(&self, x: R) -> R {
        self.piece_at(x).value(x)
    }

    /// `∫ f(x) dx` over the span (no density factor).
    pub fn integral(&self) -> R {
        let half = real::<R>(0.5);
        self.pieces.iter().fold(R::zero(), |acc, p| {
            acc + (p.hi - p.lo) * (half * p.slope * (p.hi + p.lo) + p.intercept)
        })
    }

    /// Mean value of the target over its span.
    pub fn mean(&self) -> R {
        self.integral() / (self.hi() - self.lo())
    }

    /// `(slope, intercept)` when the target is a single affine piece.
    pub fn as_affine(&self) -> Option<(R, R)> {
        if self.pieces.len() == 1 {
            Some((self.pieces[0].slope, self.pieces[0].intercept))
        } else {
            None
        }
    }

    pub(crate) fn check_span(&self, dom: &DomainMeasure<R>) -> Result<(), ModelError> {
        let tol = real::<R>(1e-9) * (R::one() + dom.width().abs());
        if (self.lo() - dom.a()).abs() > tol || (self.hi() - dom.b()).abs() > tol {
            return Err(ModelError::TargetDomainMismatch {
                t_lo: as_f64(self.lo()),
                t_hi: as_f64(self.hi()),
                a: as_f64(dom.a()),
                b: as_f64(dom.b()),
            });
        }
        Ok(())
    }
}

/// Subinterval of the line; the endpoints carry no measure, so openness is not
/// tracked. Empty when `lo ≥ hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval<R> {
    lo: R,
    hi: R,
}

impl<R: Scalar> Interval<R> {
    pub fn new(lo: R, hi: R) -> Self {
        Self { lo, hi }
    }

    pub fn empty() -> Self {
        Self {
            lo: R::zero(),
            hi: R::zero(),
        }
    }

    pub fn lo(&self) -> R {
        self.lo
    }

    pub fn hi(&self) -> R {
        self.hi
    }

    pub fn is_empty(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn length(&self) -> R {
        (self.hi - self.lo).max(R::zero())
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }
}

/// Lebesgue length of the symmetric difference of two intervals.
pub fn symdiff_length<R: Scalar>(i: &Interval<R>, j: &Interval<R>) -> R {
    let two = real::<R>(2.0);
    i.length() + j.length() - two * i.intersect(j).length()
}

/// Interior kinks of the realization together with the per-segment sets of
/// active neurons (d = 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Breakpoints<R> {
    /// Strictly increasing kink locations in the open domain interior.
    pub kinks: Vec<R>,
    /// Active neuron indices (0-based, sorted) per segment; one entry more
    /// than `kinks`.
    pub pattern: Vec<Vec<usize>>,
}

fn require_1d<R: Scalar>(theta: &ParamVector<R>) -> Result<(), ModelError> {
    let d = theta.shape().input_dim();
    if d != 1 {
        return Err(ModelError::DimensionNot1(d));
    }
    Ok(())
}

/// Sorted deduplicated kinks `−b_i/w_i` inside `(a, b)`.
fn interior_kinks<R: Scalar>(theta: &ParamVector<R>, dom: &DomainMeasure<R>) -> Vec<R> {
    let mut kinks = Vec::new();
    for i in 0..theta.shape().hidden() {
        let w = theta.weight(i, 0);
        if w != R::zero() {
            let k = -theta.bias(i) / w;
            if k > dom.a() && k < dom.b() {
                kinks.push(k);
            }
        }
    }
    kinks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = real::<R>(KINK_DEDUP_TOL);
    let mut dedup: Vec<R> = Vec::with_capacity(kinks.len());
    for k in kinks {
        match dedup.last() {
            Some(&last) if (k - last).abs() <= tol => {}
            _ => dedup.push(k),
        }
    }
    dedup
}

/// Kink locations and per-segment activation pattern of the realization on
/// `[a, b]` (d = 1). Activation is decided strictly (`pre > 0`) at segment
/// midpoints, so boundary points never affect the answer.
pub fn breakpoints<R: Scalar>(
    theta: &ParamVector<R>,
    dom: &DomainMeasure<R>,
) -> Result<Breakpoints<R>, ModelError> {
    require_1d(theta)?;
    let kinks = interior_kinks(theta, dom);
    let mut nodes = Vec::with_capacity(kinks.len() + 2);
    nodes.push(dom.a());
    nodes.extend_from_slice(&kinks);
    nodes.push(dom.b());
    let half = real::<R>(0.5);
    let mut pattern = Vec::with_capacity(nodes.len() - 1);
    for seg in nodes.windows(2) {
        let mid = half * (seg[0] + seg[1]);
        let mut active = Vec::new();
        for i in 0..theta.shape().hidden() {
            if theta.preactivation(i, &[mid]) > R::zero() {
                active.push(i);
            }
        }
        pattern.push(active);
    }
    Ok(Breakpoints { kinks, pattern })
}

/// Active region `I_i ∩ [a, b]` of neuron `i` (d = 1); empty when the neuron
/// is off on the whole domain.
pub fn active_interval<R: Scalar>(
    theta: &ParamVector<R>,
    i: usize,
    dom: &DomainMeasure<R>,
) -> Result<Interval<R>, ModelError> {
    require_1d(theta)?;
    let w = theta.weight(i, 0);
    let b = theta.bias(i);
    let iv = if w > R::zero() {
        Interval::new((-b / w).max(dom.a()), dom.b())
    } else if w < R::zero() {
        Interval::new(dom.a(), (-b / w).min(dom.b()))
    } else if b > R::zero() {
        // w = 0, b > 0: always active, no kink.
        Interval::new(dom.a(), dom.b())
    } else {
        // w = 0, b <= 0: contributes nothing.
        Interval::empty()
    };
    Ok(if iv.is_empty() { Interval::empty() } else { iv })
}

/// Sorted nodes refining `[a, b]` at network kinks and target piece
/// boundaries; consecutive nodes bound segments on which the residual
/// `N_θ − f` is affine.
pub(crate) fn refinement_nodes<R: Scalar>(
    theta: &ParamVector<R>,
    target: &Target<R>,
    dom: &DomainMeasure<R>,
) -> Vec<R> {
    let mut nodes = vec![dom.a(), dom.b()];
    nodes.extend(interior_kinks(theta, dom));
    for p in target.pieces() {
        if p.hi > dom.a() && p.hi < dom.b() {
            nodes.push(p.hi);
        }
    }
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let tol = real::<R>(KINK_DEDUP_TOL);
    let mut dedup: Vec<R> = Vec::with_capacity(nodes.len());
    for x in nodes {
        match dedup.last() {
            Some(&last) if (x - last).abs() <= tol => {}
            _ => dedup.push(x),
        }
    }
    dedup
}

/// Slope and intercept of the realization restricted to the segment whose
/// midpoint is `mid` (d = 1).
pub(crate) fn segment_affine<R: Scalar>(theta: &ParamVector<R>, mid: R) -> (R, R) {
    let mut slope = R::zero();
    let mut intercept = theta.output_bias();
    for i in 0..theta.shape().hidden() {
        if theta.preactivation(i, &[mid]) > R::zero() {
            let v = theta.output_weight(i);
            slope = slope + v * theta.weight(i, 0);
            intercept = intercept + v * theta.bias(i);
        }
    }
    (slope, intercept)
}
