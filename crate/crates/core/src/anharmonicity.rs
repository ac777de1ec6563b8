//! The anharmonicity parameter θ*.
//!
//! For `V(q) = Σ_s b⁽ˢ⁾ q^{2s}` with `2b⁽¹⁾ + a < 0`, θ* is the positive root
//! of `a + 2b⁽¹⁾ + Φ(θ) = 0`, where
//! `Φ(θ) = Σ_{s≥2} (2s)!/(2^{s-1}(s-1)!) b⁽ˢ⁾ θ^{s-1}`
//! is the Gaussian expectation of `V'' - 2b⁽¹⁾` at variance θ.

use alloc::format;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `(2s)!/(2^{s-1}(s-1)!)` as a float.
pub fn phi_coefficient(s: usize) -> f64 {
    // (2s)!/(s-1)! = Π_{j=s}^{2s} j
    let mut c = 1.0;
    for j in s..=2 * s {
        c *= j as f64;
    }
    c / 2f64.powi(s as i32 - 1)
}

fn check_tail(coeffs: &[f64]) -> Result<()> {
    if let Some(s) = coeffs
        .iter()
        .skip(1)
        .position(|&b| b < 0.0 || !b.is_finite())
    {
        return Err(Error::invalid(
            "anharm_coeffs",
            format!("b^({}) must be non-negative", s + 2),
        ));
    }
    Ok(())
}

/// `Φ(θ)` for the coefficients `(b⁽¹⁾, …, b⁽ʳ⁾)`; `b⁽¹⁾` does not enter.
pub fn phi_series(coeffs: &[f64], theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::invalid("theta", "must be positive"));
    }
    check_tail(coeffs)?;
    Ok(phi_unchecked(coeffs, theta))
}

fn phi_unchecked(coeffs: &[f64], theta: f64) -> f64 {
    // Horner in θ over s = r..2
    let mut acc = 0.0;
    for s in (2..=coeffs.len()).rev() {
        acc = acc * theta + phi_coefficient(s) * coeffs[s - 1];
    }
    acc * theta
}

fn phi_derivative(coeffs: &[f64], theta: f64) -> f64 {
    (2..=coeffs.len())
        .map(|s| phi_coefficient(s) * coeffs[s - 1] * (s - 1) as f64 * theta.powi(s as i32 - 2))
        .sum()
}

/// Unique positive root of `a + 2b⁽¹⁾ + Φ(θ) = 0`.
pub fn theta_star(coeffs: &[f64], rigidity_a: f64) -> Result<f64> {
    check_tail(coeffs)?;
    let b1 = coeffs.first().copied().unwrap_or(0.0);
    let c = rigidity_a + 2.0 * b1;
    if !(c < 0.0) {
        return Err(Error::NoDoubleWell(format!(
            "a + 2 b^(1) = {c} is not negative"
        )));
    }
    if !coeffs.iter().skip(1).any(|&b| b > 0.0) {
        return Err(Error::NoDoubleWell("no positive b^(s) with s >= 2".into()));
    }
    let g = |t: f64| c + phi_unchecked(coeffs, t);
    let (mut lo, mut hi) = (1e-12, 1.0);
    while g(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("theta* bracket expansion overflowed".into()));
        }
    }
    if g(lo) > 0.0 {
        // root below 1e-12: only possible for absurdly steep wells
        return Err(Error::Domain("theta* below 1e-12".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d = phi_derivative(coeffs, t);
        if d <= 0.0 {
            break;
        }
        let next = t - g(t) / d;
        if !(next > lo * (1.0 - 1e-12) && next < hi * (1.0 + 1e-12)) {
            break;
        }
        t = next;
    }
    Ok(t)
}

/// θ* for `V(u) = -b|u|² + b₂|u|⁴` on `ℝ^ν`: `(2b - a)ν/(4b₂(ν+2))`.
pub fn theta_star_phi4(a: f64, b: f64, b2: f64, nu: usize) -> Result<f64> {
    if !(b > 0.5 * a) {
        return Err(Error::NoDoubleWell(format!(
            "need b > a/2, got b = {b}, a = {a}"
        )));
    }
    if !(b2 > 0.0) {
        return Err(Error::invalid("b2", "must be positive"));
    }
    if nu == 0 {
        return Err(Error::invalid("nu", "must be at least 1"));
    }
    let nu = nu as f64;
    Ok((2.0 * b - a) * nu / (4.0 * b2 * (nu + 2.0)))
}

/// θ* together with the data it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicityProfile {
    pub coeffs: alloc::vec::Vec<f64>,
    pub rigidity_a: f64,
    pub theta_star: f64,
    /// `|a + 2b⁽¹⁾ + Φ(θ*)| / max(|a|, |2b⁽¹⁾|)`.
    pub residual: f64,
}

impl AnharmonicityProfile {
    pub fn new(coeffs: &[f64], rigidity_a: f64) -> Result<Self> {
        let theta = theta_star(coeffs, rigidity_a)?;
        let b1 = coeffs.first().copied().unwrap_or(0.0);
        let scale = rigidity_a.abs().max((2.0 * b1).abs());
        let residual = (rigidity_a + 2.0 * b1 + phi_unchecked(coeffs, theta)).abs() / scale;
        Ok(AnharmonicityProfile {
            coeffs: coeffs.to_vec(),
            rigidity_a,
            theta_star: theta,
            residual,
        })
    }
}
