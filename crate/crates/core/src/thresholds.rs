//! Stability and phase-transition thresholds.
//!
//! * stability: `Ĵ₀ < R_m = m Δ_m²` (quantum stabilisation, uniqueness);
//! * transition (nearest-neighbour, `d ≥ 3`): `8 m θ*² J > J(d)`, with the
//!   threshold `β*` solving `2βJθ* f(β/(4mθ*)) = J(d)`, where `f` is defined
//!   by `u tanh u = t`, `f(t) = tanh(u)/u`.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::anharmonicity::{theta_star, theta_star_phi4};
use crate::lattice_green::green_j;
use crate::model::LatticeModel;
use crate::oscillator::{solve_spectrum, OscillatorSpec};
use crate::special::gamma;
use crate::{Error, Result};

/// Root `u ≥ 0` of `u tanh u = t`.
pub fn implicit_u(t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    // max(√t, t) ≤ u ≤ (t + √(t² + 4t))/2 since u/(1+u) ≤ tanh u ≤ 1 and tanh u ≤ u
    let mut lo = t.sqrt().max(t);
    let mut hi = 0.5 * (t + (t * t + 4.0 * t).sqrt());
    let mut u = lo;
    for _ in 0..100 {
        let th = u.tanh();
        let g = u * th - t;
        if g == 0.0 {
            return u;
        }
        if g < 0.0 {
            lo = lo.max(u);
        } else {
            hi = hi.min(u);
        }
        let dg = th + u * (1.0 - th * th);
        let mut next = u - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-16 * u {
            return next;
        }
        u = next;
    }
    u
}

/// `f(t) = tanh(u)/u` with `u tanh u = t`; `f(0) = 1`.
pub fn f_implicit(t: f64) -> f64 {
    assert!(t >= 0.0, "f is defined for t >= 0");
    let u = implicit_u(t);
    if u < 1e-5 {
        // tanh(u)/u = 1 - u²/3 + 2u⁴/15
        let u2 = u * u;
        1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0
    } else {
        u.tanh() / u
    }
}

/// `φ(β) = 2βJθ* f(β/(4mθ*))`, increasing to `8mJθ*²`.
pub fn phi_beta(beta: f64, j: f64, theta_star: f64, m: f64) -> f64 {
    2.0 * beta * j * theta_star * f_implicit(beta / (4.0 * m * theta_star))
}

/// `β*` for a given `J(d)` value.
pub fn beta_star_for(j: f64, theta_star: f64, m: f64, green: f64, tol: f64) -> Result<f64> {
    if !(j > 0.0 && theta_star > 0.0 && m > 0.0 && green > 0.0) {
        return Err(Error::invalid(
            "beta_star",
            "J, theta*, m and J(d) must be positive",
        ));
    }
    let limit = 8.0 * m * theta_star * theta_star * j;
    if !(limit > green) {
        return Err(Error::NoThreshold {
            deficit: limit - green,
        });
    }
    let phi = |b: f64| phi_beta(b, j, theta_star, m);
    let (mut lo, mut hi) = (0.0, 1.0);
    while phi(hi) < green {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("beta* bracket expansion overflowed".into()));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < green {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = ((phi(lo) - green).abs(), (phi(hi) - green).abs());
    let (b, r) = if rl <= rh { (lo, rl) } else { (hi, rh) };
    if r > tol {
        return Err(Error::Accuracy {
            target: tol,
            achieved: r,
        });
    }
    Ok(b)
}

/// Unique `β` with `φ(β) = J(d)`; requires `8mθ*²J > J(d)`.
pub fn beta_star(j: f64, theta_star: f64, m: f64, d: usize, tol: f64) -> Result<f64> {
    let green = green_j(d, 1e-13)?.value;
    beta_star_for(j, theta_star, m, green, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UniqueAllBeta,
    TransitionAboveBetaStar,
    Indeterminate,
}

/// Classifier output with every intermediate quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseClassification {
    pub verdict: Verdict,
    pub theta_star: Option<f64>,
    pub gap: f64,
    pub rigidity: f64,
    pub j0_hat: f64,
    pub green_value: Option<f64>,
    /// `8 d m θ*² J`, to be compared with `d J(d)`.
    pub stability_lhs: Option<f64>,
    /// `R_m - Ĵ₀`; positive means the stability condition holds.
    pub stability_margin: f64,
    /// `8 m θ*² J - J(d)`; positive means the transition condition holds.
    pub transition_margin: Option<f64>,
    pub beta_star: Option<f64>,
    pub beta_star_residual: Option<f64>,
    /// Whether the hypotheses of the uniqueness theorem (even potential, convex
    /// reference function) are known to hold.
    pub uniqueness_hypotheses: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyOptions {
    pub n_levels: usize,
    pub spectrum_tol: f64,
    pub beta_star_tol: f64,
    /// Caller asserts the convex-reference hypotheses for potentials where
    /// they cannot be checked automatically.
    pub assert_uniqueness_hypotheses: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_levels: 8,
            spectrum_tol: 1e-10,
            beta_star_tol: 1e-10,
            assert_uniqueness_hypotheses: false,
        }
    }
}

/// `V(x) = W(x²)` with `W` convex on `[0, ∞)` gives the hypotheses with `v = W`.
fn convex_reference(spec: &OscillatorSpec) -> bool {
    spec.is_even() && spec.anharm_coeffs.iter().skip(1).all(|&b| b >= 0.0)
}

/// θ* by the series (scalar) or the `φ⁴` closed form (vector, `r = 2`).
fn anharmonicity_parameter(spec: &OscillatorSpec) -> core::result::Result<f64, String> {
    if !spec.is_even() {
        return Err("potential is not even".into());
    }
    if spec.spin_dim == 1 {
        theta_star(&spec.anharm_coeffs, spec.rigidity_a).map_err(|e| format!("{e}"))
    } else if spec.anharm_coeffs.len() == 2 {
        theta_star_phi4(
            spec.rigidity_a,
            -spec.anharm_coeffs[0],
            spec.anharm_coeffs[1],
            spec.spin_dim,
        )
        .map_err(|e| format!("{e}"))
    } else {
        Err("vector models need a quartic double well for theta*".into())
    }
}

pub fn classify(model: &LatticeModel, spec: &OscillatorSpec) -> Result<PhaseClassification> {
    classify_with(model, spec, &ClassifyOptions::default())
}

pub fn classify_with(
    model: &LatticeModel,
    spec: &OscillatorSpec,
    opts: &ClassifyOptions,
) -> Result<PhaseClassification> {
    model.validate()?;
    spec.validate()?;
    let d = model.dimension;
    let mut notes = vec![];
    if spec.spin_dim > 1 {
        notes.push("gap taken from the scalar reference oscillator with the same v(q^2)".into());
    }
    let spectrum = solve_spectrum(spec, opts.n_levels, opts.spectrum_tol)?;
    let j0_hat = model.coupling.j0_hat(d);
    let stability_margin = spectrum.rigidity - j0_hat;
    let stable = stability_margin > 0.0;

    let theta = match anharmonicity_parameter(spec) {
        Ok(t) => Some(t),
        Err(why) => {
            notes.push(format!("transition branch inapplicable: {why}"));
            None
        }
    };
    let nn = model.coupling.nearest_neighbor_j();
    if nn.is_none() && theta.is_some() {
        notes.push("transition branch inapplicable: coupling is not nearest-neighbour".into());
    }
    if nn.is_some() && d < 3 && theta.is_some() {
        notes.push(format!("transition branch inapplicable: dimension {d} < 3"));
    }
    let mut green_value = None;
    let mut stability_lhs = None;
    let mut transition_margin = None;
    if let (Some(t), Some(j), true) = (theta, nn, d >= 3) {
        let g = green_j(d, 1e-13)?.value;
        green_value = Some(g);
        let lhs = 8.0 * spec.mass * t * t * j;
        stability_lhs = Some(d as f64 * lhs);
        transition_margin = Some(lhs - g);
    }
    let transition = transition_margin.is_some_and(|m| m > 0.0);

    let hypotheses = convex_reference(spec) || opts.assert_uniqueness_hypotheses;
    let mut beta_star_value = None;
    let mut residual = None;
    let verdict = if stable && transition {
        notes.push(
            "stability and transition conditions both hold numerically; reported as indeterminate"
                .into(),
        );
        Verdict::Indeterminate
    } else if stable {
        if hypotheses {
            Verdict::UniqueAllBeta
        } else {
            notes
                .push("stability condition holds, uniqueness theorem hypotheses unverified".into());
            Verdict::Indeterminate
        }
    } else if transition {
        let (t, j, g) = (theta.unwrap(), nn.unwrap(), green_value.unwrap());
        let b = beta_star_for(j, t, spec.mass, g, opts.beta_star_tol)?;
        beta_star_value = Some(b);
        residual = Some((phi_beta(b, j, t, spec.mass) - g).abs());
        Verdict::TransitionAboveBetaStar
    } else {
        Verdict::Indeterminate
    };
    Ok(PhaseClassification {
        verdict,
        theta_star: theta,
        gap: spectrum.gap,
        rigidity: spectrum.rigidity,
        j0_hat,
        green_value,
        stability_lhs,
        stability_margin,
        transition_margin,
        beta_star: beta_star_value,
        beta_star_residual: residual,
        uniqueness_hypotheses: hypotheses,
        notes,
    })
}

/// High-temperature uniqueness test `e^{βδ} < (a + b)/Ĵ₀` for a caller-chosen
/// decomposition of the potential into a convex part (constant `b`) and a
/// bounded part of oscillation `δ`.
pub fn high_temp_uniqueness(
    a: f64,
    b_conv: f64,
    delta_osc: f64,
    j0_hat: f64,
    beta: f64,
) -> Result<bool> {
    if !(a + b_conv > 0.0) {
        return Err(Error::Domain(format!(
            "a + b = {} must be positive",
            a + b_conv
        )));
    }
    if !(j0_hat > 0.0) {
        return Err(Error::Domain(format!("J0 = {j0_hat} must be positive")));
    }
    if !(beta > 0.0) || !(delta_osc >= 0.0) {
        return Err(Error::Domain(
            "beta must be positive and delta non-negative".into(),
        ));
    }
    Ok(beta * delta_osc < ((a + b_conv) / j0_hat).ln())
}

/// Garsia–Rodemich–Rumsey constant
/// `D(σ, p, ν) = 2^{3(2p+1)} (1 + 1/(σp))^{2p} / ((p - 1 - 2σp)(p - 2σp)) · 2^p Γ(ν/2 + 1)/Γ(ν/2)`.
pub fn grr_constant(sigma: f64, p: u32, nu: usize) -> Result<f64> {
    let pf = p as f64;
    if !(sigma > 0.0 && sigma < 0.5) {
        return Err(Error::Domain(format!(
            "sigma = {sigma} must lie in (0, 1/2)"
        )));
    }
    if p == 0 || !((pf - 1.0) / (2.0 * pf) > sigma) {
        return Err(Error::Domain(format!(
            "need (p-1)/(2p) > sigma, got p = {p}"
        )));
    }
    if nu == 0 {
        return Err(Error::Domain("nu must be at least 1".into()));
    }
    let nuf = nu as f64;
    let den = (pf - 1.0 - 2.0 * sigma * pf) * (pf - 2.0 * sigma * pf);
    let first = 2f64.powf(3.0 * (2.0 * pf + 1.0)) * (1.0 + 1.0 / (sigma * pf)).powf(2.0 * pf) / den;
    let second = 2f64.powf(pf) * gamma(0.5 * nuf + 1.0) / gamma(0.5 * nuf);
    Ok(first * second)
}

/// Mass bound `m* = β/(n (c - ε)²) · (D_V/Σ)^{1/p}`.
#[allow(clippy::too_many_arguments)]
pub fn grr_mass_bound(
    beta: f64,
    n: usize,
    c: f64,
    eps: f64,
    p: u32,
    sigma_nc: f64,
    d_v: f64,
) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain("beta must be positive".into()));
    }
    if n < 2 {
        return Err(Error::Domain("n must be at least 2".into()));
    }
    if !(eps > 0.0 && eps < c) {
        return Err(Error::Domain("need 0 < eps < c".into()));
    }
    if !(sigma_nc > 0.0 && sigma_nc <= 1.0) {
        return Err(Error::Domain("Sigma must lie in (0, 1]".into()));
    }
    if !(d_v > 0.0) || p == 0 {
        return Err(Error::Domain("D_V and p must be positive".into()));
    }
    Ok(beta / (n as f64 * (c - eps) * (c - eps)) * (d_v / sigma_nc).powf(1.0 / p as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_basic_values() {
        assert_eq!(f_implicit(0.0), 1.0);
        let t = 1f64.tanh();
        assert!((f_implicit(t) - t).abs() < 1e-14);
        assert!((f_implicit(6.0) - 1.0 / 6.0).abs() < 1e-5);
    }

    #[test]
    fn phi_limits() {
        let (j, th, m) = (2.0, 1.0 / 12.0, 1.0);
        assert!(phi_beta(1e-9, j, th, m) < 1e-9);
        let lim = 8.0 * m * j * th * th;
        assert!((phi_beta(1e6, j, th, m) - lim).abs() <= 1e-4 * lim);
    }

    #[test]
    fn grr_sigma_p_checks() {
        assert!(grr_constant(0.3, 2, 1).is_err());
        let d1 = grr_constant(0.2, 2, 1).unwrap();
        let d3 = grr_constant(0.2, 2, 3).unwrap();
        assert!((d3 / d1 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn mass_bound_unity() {
        let m = grr_mass_bound(4.0, 4, 1.5, 0.5, 2, 1.0, 1.0).unwrap();
        assert!((m - 1.0).abs() < 1e-15);
    }

    #[test]
    fn high_temperature_rule() {
        assert!(high_temp_uniqueness(1.0, 0.5, 0.0, 1.0, 1e6).unwrap());
        assert!(!high_temp_uniqueness(1.0, 0.5, 0.1, 1.0, 1e3).unwrap());
        assert!(high_temp_uniqueness(1.0, 0.0, 0.0, 0.0, 1.0).is_err());
    }
}
