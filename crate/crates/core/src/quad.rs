//! One-dimensional quadrature rules shared by the lattice and Matsubara code.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

use crate::{Error, Result};

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
}

const MAX_LEVELS: usize = 12;

/// Double-exponential (tanh-sinh) quadrature of `f` over `[a, b]`.
///
/// The step is halved until two successive levels agree to `tol`
/// (absolute). `f` is never evaluated at the endpoints, so integrable
/// endpoint singularities are allowed.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    tanh_sinh_impl(f, a, b, tol, 0.0)
}

/// [`tanh_sinh`] with a tolerance relative to the magnitude of the result.
pub fn tanh_sinh_rel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> Result<Quadrature> {
    tanh_sinh_impl(f, a, b, 0.0, rel)
}

fn tanh_sinh_impl<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs: f64,
    rel: f64,
) -> Result<Quadrature> {
    let half = 0.5 * (b - a);
    let pi_2 = core::f64::consts::FRAC_PI_2;
    // contribution of abscissa t (and -t) for the current step
    let pair = |t: f64| -> f64 {
        let s = pi_2 * t.sinh();
        let c = s.cosh();
        let w = pi_2 * t.cosh() / (c * c);
        // distance from the nearer endpoint, computed without cancellation
        let d = half / (s.exp() * c);
        let mut acc = 0.0;
        if d > 0.0 {
            let left = a + d;
            let right = b - d;
            if left > a && left < b {
                acc += w * f(left);
            }
            if t != 0.0 && right > a && right < b {
                acc += w * f(right);
            }
        }
        acc
    };
    let t_max = 4.0;
    let mut h = 1.0;
    let mut sum = pair(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += pair(k as f64 * h);
        k += 1;
    }
    let mut estimate = half * h * sum;
    let mut error = f64::INFINITY;
    for _ in 0..MAX_LEVELS {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= t_max {
            sum += pair(k as f64 * h);
            k += 2;
        }
        let next = half * h * sum;
        error = (next - estimate).abs();
        estimate = next;
        if error <= abs.max(rel * estimate.abs()) {
            return Ok(Quadrature {
                value: estimate,
                abs_error: error,
            });
        }
    }
    let target = abs.max(rel * estimate.abs());
    if error <= 10.0 * target {
        return Ok(Quadrature {
            value: estimate,
            abs_error: error,
        });
    }
    Err(Error::Accuracy {
        target,
        achieved: error,
    })
}

/// `∫_0^∞ f` as `∫_0^s f(t) dt + ∫_0^1 f(s/x²) 2s/x³ dx`.
///
/// The substitution turns an algebraic tail `t^{-α}` (α > 1) into a bounded
/// integrand; `scale` should sit where `f` starts its tail.
pub fn semi_infinite<F: Fn(f64) -> f64>(f: F, scale: f64, tol: f64) -> Result<Quadrature> {
    semi_infinite_impl(f, scale, 0.5 * tol, 0.0)
}

/// [`semi_infinite`] with a relative tolerance on each of the two pieces.
pub fn semi_infinite_rel<F: Fn(f64) -> f64>(f: F, scale: f64, rel: f64) -> Result<Quadrature> {
    semi_infinite_impl(f, scale, 0.0, rel)
}

fn semi_infinite_impl<F: Fn(f64) -> f64>(
    f: F,
    scale: f64,
    abs: f64,
    rel: f64,
) -> Result<Quadrature> {
    let head = tanh_sinh_impl(&f, 0.0, scale, abs, rel)?;
    let tail = tanh_sinh_impl(
        |x: f64| {
            let t = scale / (x * x);
            let v = f(t);
            if v == 0.0 {
                0.0
            } else {
                v * 2.0 * scale / (x * x * x)
            }
        },
        0.0,
        1.0,
        abs,
        rel,
    )?;
    Ok(Quadrature {
        value: head.value + tail.value,
        abs_error: head.abs_error + tail.abs_error,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&v| half * v).collect(),
    )
}

/// Pairwise (cascade) summation for a reproducible, well-conditioned total.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_polynomial_and_endpoint_singularity() {
        let q = tanh_sinh(|x| x * x, 0.0, 3.0, 1e-13).unwrap();
        assert!((q.value - 9.0).abs() < 1e-12);
        let q = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12).unwrap();
        assert!((q.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_algebraic_and_exponential_tails() {
        let q = semi_infinite(|t| 1.0 / (1.0 + t * t), 1.0, 1e-12).unwrap();
        assert!((q.value - core::f64::consts::FRAC_PI_2).abs() < 1e-11);
        let q = semi_infinite(|t| (-3.0 * t).exp(), 1.0, 1e-12).unwrap();
        assert!((q.value - 1.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for n in [1usize, 2, 5, 12, 33] {
            let (x, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let quad: f64 = x
                .iter()
                .zip(&w)
                .map(|(&t, &v)| v * t.powi(deg as i32 - 1))
                .sum();
            let exact = if (deg - 1) % 2 == 0 {
                2.0 / deg as f64
            } else {
                0.0
            };
            assert!((quad - exact).abs() < 1e-12, "n={n}");
        }
    }
}
