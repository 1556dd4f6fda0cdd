//! Monte-Carlo risk and generalized-gradient estimators for general input
//! dimension.
//!
//! Sampling is uniform on the box `[a, b]^d`, so `∫ g dμ = ρ(b−a)^d · E[g(U)]`.
//! Draws are counter-based (see [`crate::rng`]) and block sums are combined in
//! a fixed order, so an estimate is a pure function of `(θ, f, dom, n, seed)`
//! regardless of how many workers run the blocks.

use crate::model::{DomainMeasure, ParamVector};
use crate::rng::uniform01;
use crate::scalar::{real, Scalar};
use rayon::prelude::*;

const BLOCK: u64 = 4096;

/// Scalar Monte-Carlo estimate.
#[derive(Clone, Debug)]
pub struct McEstimate<R> {
    pub mean: R,
    pub std_error: R,
    pub n_samples: usize,
    pub seed: u64,
}

/// Componentwise Monte-Carlo estimate of a vector quantity.
#[derive(Clone, Debug)]
pub struct McVectorEstimate<R> {
    pub mean: Vec<R>,
    pub std_error: Vec<R>,
    pub n_samples: usize,
    pub seed: u64,
}

fn draw_point<R: Scalar>(dom: &DomainMeasure<R>, d: usize, seed: u64, k: u64, buf: &mut [R]) {
    for (j, slot) in buf.iter_mut().enumerate().take(d) {
        let u: R = uniform01(seed, k * d as u64 + j as u64);
        *slot = dom.a() + dom.width() * u;
    }
}

/// Monte-Carlo estimate of the risk `∫ (N_θ − f)² dμ`.
pub fn mc_risk<R: Scalar>(
    theta: &ParamVector<R>,
    f: &(impl Fn(&[R]) -> R + Sync),
    dom: &DomainMeasure<R>,
    n: usize,
    seed: u64,
) -> McEstimate<R> {
    assert!(n >= 2, "need at least two samples");
    let d = theta.shape().input_dim();
    let mass = dom.mass(d);
    let n_blocks = (n as u64).div_ceil(BLOCK);
    let partials: Vec<(R, R)> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut x = vec![R::zero(); d];
            let (mut s, mut s2) = (R::zero(), R::zero());
            let lo = blk * BLOCK;
            let hi = ((blk + 1) * BLOCK).min(n as u64);
            for k in lo..hi {
                draw_point(dom, d, seed, k, &mut x);
                let res = theta.realization(&x) - f(&x);
                let y = mass * res * res;
                s = s + y;
                s2 = s2 + y * y;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum_sq) = partials
        .iter()
        .fold((R::zero(), R::zero()), |(a, b), &(s, s2)| (a + s, b + s2));
    let nf = real::<R>(n as f64);
    let mean = sum / nf;
    let var = ((sum_sq - sum * sum / nf) / (nf - R::one())).max(R::zero());
    McEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        n_samples: n,
        seed,
    }
}

/// Monte-Carlo estimate of the generalized gradient: per-component sample
/// means of the gradient integrands, with the active-region indicator
/// evaluated by the strict sign test.
pub fn mc_gradient<R: Scalar>(
    theta: &ParamVector<R>,
    f: &(impl Fn(&[R]) -> R + Sync),
    dom: &DomainMeasure<R>,
    n: usize,
    seed: u64,
) -> McVectorEstimate<R> {
    assert!(n >= 2, "need at least two samples");
    let d = theta.shape().input_dim();
    let hidden = theta.shape().hidden();
    let dim = theta.shape().dim();
    let mass = dom.mass(d);
    let two = real::<R>(2.0);
    let n_blocks = (n as u64).div_ceil(BLOCK);
    let partials: Vec<(Vec<R>, Vec<R>)> = (0..n_blocks)
        .into_par_iter()
        .map(|blk| {
            let mut x = vec![R::zero(); d];
            let mut s = vec![R::zero(); dim];
            let mut s2 = vec![R::zero(); dim];
            let mut y = vec![R::zero(); dim];
            let lo = blk * BLOCK;
            let hi = ((blk + 1) * BLOCK).min(n as u64);
            for k in lo..hi {
                draw_point(dom, d, seed, k, &mut x);
                let res = theta.realization(&x) - f(&x);
                let base = two * mass * res;
                for i in 0..hidden {
                    let pre = theta.preactivation(i, &x);
                    let active = pre > R::zero();
                    let v = theta.output_weight(i);
                    for j in 0..d {
                        y[i * d + j] = if active { base * v * x[j] } else { R::zero() };
                    }
                    y[hidden * d + i] = if active { base * v } else { R::zero() };
                    y[hidden * (d + 1) + i] = if active { base * pre } else { R::zero() };
                }
                y[dim - 1] = base;
                for (k, &yk) in y.iter().enumerate() {
                    s[k] = s[k] + yk;
                    s2[k] = s2[k] + yk * yk;
                }
            }
            (s, s2)
        })
        .collect();
    let mut sum = vec![R::zero(); dim];
    let mut sum_sq = vec![R::zero(); dim];
    for (s, s2) in &partials {
        for k in 0..dim {
            sum[k] = sum[k] + s[k];
            sum_sq[k] = sum_sq[k] + s2[k];
        }
    }
    let nf = real::<R>(n as f64);
    let mean: Vec<R> = sum.iter().map(|&s| s / nf).collect();
    let std_error: Vec<R> = sum
        .iter()
        .zip(&sum_sq)
        .map(|(&s, &s2)| (((s2 - s * s / nf) / (nf - R::one())).max(R::zero()) / nf).sqrt())
        .collect();
    McVectorEstimate {
        mean,
        std_error,
        n_samples: n,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NetworkShape, Target};

    fn unit() -> DomainMeasure<f64> {
        DomainMeasure::unit()
    }

    #[test]
    fn exact_fit_estimates_zero() {
        let dom = unit();
        let theta = ParamVector::width1(1.0, 0.0, 1.0, 0.0);
        let est = mc_risk(&theta, &|x: &[f64]| x[0], &dom, 10_000, 7);
        assert!(est.mean.abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn constant_residual_matches_exact_risk() {
        let dom = unit();
        let theta = ParamVector::width1(1.0, 0.0, 1.0, 1.0);
        let est = mc_risk(&theta, &|x: &[f64]| x[0], &dom, 1_000_000, 11);
        assert!(
            (est.mean - 1.0).abs() <= 4.0 * est.std_error + 1e-12,
            "mean {} se {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn gradient_estimate_matches_exact_gradient() {
        let dom = unit();
        let theta = ParamVector::width1(1.0, 0.0, 1.0, 1.0);
        let est = mc_gradient(&theta, &|x: &[f64]| x[0], &dom, 1_000_000, 13);
        for (k, want) in [1.0, 2.0, 1.0, 2.0].into_iter().enumerate() {
            assert!(
                (est.mean[k] - want).abs() <= 4.0 * est.std_error[k] + 1e-12,
                "component {k}: {} vs {want}",
                est.mean[k]
            );
        }
    }

    #[test]
    fn d2_hand_built_exact_fit() {
        // Two neurons reproduce f(x1, x2) = x1 + x2 on [0, 1]^2.
        let shape = NetworkShape::new(2, 2);
        let mut theta = ParamVector::zeros(shape);
        theta.set_weight(0, 0, 1.0);
        theta.set_bias(0, 0.0);
        theta.set_output_weight(0, 1.0);
        theta.set_weight(1, 1, 1.0);
        theta.set_bias(1, 0.0);
        theta.set_output_weight(1, 1.0);
        let est = mc_risk(&theta, &|x: &[f64]| x[0] + x[1], &dom2(), 50_000, 3);
        assert!(est.mean.abs() < 1e-12, "mean {}", est.mean);
    }

    fn dom2() -> DomainMeasure<f64> {
        DomainMeasure::new(0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn inactive_neuron_components_are_exactly_zero() {
        let shape = NetworkShape::new(2, 2);
        let mut theta = ParamVector::zeros(shape);
        theta.set_weight(0, 0, 1.0);
        theta.set_output_weight(0, 0.5);
        // Neuron 1 is off on the whole box.
        theta.set_weight(1, 0, 0.1);
        theta.set_weight(1, 1, 0.1);
        theta.set_bias(1, -5.0);
        theta.set_output_weight(1, 3.0);
        let est = mc_gradient(&theta, &|x: &[f64]| x[0] * x[1], &dom2(), 10_000, 5);
        for k in [2, 3, 5, 7] {
            // w_{1,0}, w_{1,1}, b_1, v_1 slots.
            assert_eq!(est.mean[k], 0.0);
            assert_eq!(est.std_error[k], 0.0);
        }
    }

    #[test]
    fn estimates_are_deterministic_under_fixed_seed() {
        let dom = unit();
        let theta = ParamVector::width1(0.8, -0.2, 1.3, 0.1);
        let f = |x: &[f64]| 0.5 * x[0] + 0.1;
        let a = mc_risk(&theta, &f, &dom, 33_333, 99);
        let b = mc_risk(&theta, &f, &dom, 33_333, 99);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        // Identical bits regardless of worker count.
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool3 = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool1.install(|| mc_risk(&theta, &f, &dom, 33_333, 99));
        let d = pool3.install(|| mc_risk(&theta, &f, &dom, 33_333, 99));
        assert_eq!(c.mean.to_bits(), d.mean.to_bits());
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());
        let ga = mc_gradient(&theta, &f, &dom, 20_000, 42);
        let gb = mc_gradient(&theta, &f, &dom, 20_000, 42);
        for (x, y) in ga.mean.iter().zip(&gb.mean) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn gradient_norm_bound_holds_for_mc_means_in_d2() {
        // ‖G‖² ≤ 4·L·(a̅²(d+1)‖θ‖² + 1)·mass, with both sides estimated by
        // Monte Carlo and slack of five standard errors per quantity.
        let dom = DomainMeasure::<f64>::new(-0.5, 1.0, 1.0).unwrap();
        let f = |x: &[f64]| 0.6 * x[0] - 0.3 * x[1] + 0.2;
        let shape = NetworkShape::new(2, 2);
        let a_bar = dom.a().abs().max(dom.b().abs()).max(1.0);
        for case in 0..50u64 {
            let seed = crate::rng::derive_seed(77, case);
            let values: Vec<f64> = (0..shape.dim())
                .map(|k| crate::rng::standard_normal(seed, k as u64))
                .collect();
            let theta = ParamVector::new(shape, values).unwrap();
            let risk = mc_risk(&theta, &f, &dom, 40_000, seed);
            let grad = mc_gradient(&theta, &f, &dom, 40_000, seed.wrapping_add(1));
            let lhs: f64 = grad
                .mean
                .iter()
                .zip(&grad.std_error)
                .map(|(m, se)| (m.abs() - 5.0 * se).max(0.0).powi(2))
                .sum();
            let rhs = 4.0
                * (risk.mean + 5.0 * risk.std_error)
                * (a_bar * a_bar * 3.0 * theta.norm_sq() + 1.0)
                * dom.mass(2);
            assert!(lhs <= rhs, "case {case}: lhs {lhs} rhs {rhs}");
        }
    }

    #[test]
    fn d1_cross_validation_against_exact() {
        let dom = DomainMeasure::new(-0.5, 1.0, 1.3).unwrap();
        let target = Target::affine(0.7, 0.2, &dom);
        let f = |x: &[f64]| 0.7 * x[0] + 0.2;
        for case in 0..30u64 {
            let seed = crate::rng::derive_seed(61, case);
            let theta = ParamVector::width1(
                crate::rng::standard_normal::<f64>(seed, 0),
                crate::rng::standard_normal::<f64>(seed, 1),
                crate::rng::standard_normal::<f64>(seed, 2),
                crate::rng::standard_normal::<f64>(seed, 3),
            );
            let exact = crate::exact_risk::risk(&theta, &target, &dom).unwrap();
            let est = mc_risk(&theta, &f, &dom, 40_000, seed);
            assert!(
                (est.mean - exact).abs() <= 4.0 * est.std_error + 1e-12,
                "case {case}: {} vs {exact} (se {})",
                est.mean,
                est.std_error
            );
        }
    }
}
