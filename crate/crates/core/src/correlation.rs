//! Analytic upper bounds on the two-point function of the crystal.
//!
//! Under the stability condition `û(0) Ĵ₀ < 1`,
//!
//! `K_{ℓℓ'}(τ, τ') ≤ Y = (1/β) Σ_k (2π)^{-d} ∫ dp e^{i(p·ℓ + kτ)} / ([û(k)]^{-1} - Ĵ₀ + Υ(p))`
//!
//! with `Υ(p) = Ĵ₀ - Ĵ(p)`; on a torus the Brillouin integral becomes the
//! momentum average over `Λ*` with the box quantities `Ĵ₀^Λ`, `Υ^Λ`.
//!
//! The Matsubara sum is evaluated through the lattice resolvent
//! `R(c, ℓ) = (2π)^{-d} ∫ e^{ip·ℓ}/(c + Υ(p)) dp`. For `ℓ = 0` the slowly
//! decaying part `1/(m(k² + Δ²))` is subtracted term by term and summed in
//! closed form. Beyond the tabulated frequencies `û` is replaced by its
//! majorant `1/(m(k² + Δ²))`.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::lattice_green::{brillouin_integrate_complex, dispersion, green_at, green_j};
use crate::model::{Coupling, Torus};
use crate::oscillator::{matsubara_lorentzian_sum, MatsubaraTable};
use crate::quad::semi_infinite_rel;
use crate::special::bessel_ine;
use crate::thresholds::f_implicit;
use crate::{Error, Result};

/// `Υ(p) = Ĵ₀ - Ĵ(p) ≥ 0`.
pub fn upsilon(p: &[f64], coupling: &Coupling) -> Result<f64> {
    coupling
        .upsilon(p)
        .ok_or_else(|| Error::invalid("coupling", "Fourier kernel unknown; only Ĵ₀ was given"))
}

/// `min_k ([û(k)]^{-1} - Ĵ₀)`; the bound needs it positive.
pub fn stability_margin(table: &MatsubaraTable, j0_hat: f64) -> f64 {
    table
        .values
        .iter()
        .map(|&u| 1.0 / u - j0_hat)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBoundTable {
    pub beta: f64,
    pub dimension: usize,
    /// Torus side for finite-box tables, `None` for the infinite lattice.
    pub box_size: Option<usize>,
    pub offsets: Vec<Vec<i64>>,
    pub dtaus: Vec<f64>,
    /// `values[i][j]` is `Y(offsets[i], dtaus[j])`.
    pub values: Vec<Vec<f64>>,
    pub max_kappa: usize,
    pub tol: f64,
    pub margin: f64,
    pub u_source: String,
}

/// Resolvent evaluator for one coupling.
enum Resolvent<'a> {
    /// `∫_0^∞ e^{-sc} Π_j e^{-2Js} I_{ℓ_j}(2Js) ds`.
    Laplace {
        j: f64,
    },
    Brillouin {
        coupling: &'a Coupling,
    },
    Torus {
        torus: Torus,
        upsilon: Vec<f64>,
        momenta: Vec<Vec<f64>>,
    },
}

impl Resolvent<'_> {
    fn eval(&self, c: f64, offset: &[i64], rel: f64) -> Result<f64> {
        match self {
            Resolvent::Laplace { j } => {
                if *j == 0.0 {
                    return Ok(if offset.iter().all(|&o| o == 0) {
                        1.0 / c
                    } else {
                        0.0
                    });
                }
                let x = 2.0 * j;
                let orders: Vec<u32> = offset.iter().map(|o| o.unsigned_abs() as u32).collect();
                let l1: f64 = orders.iter().map(|&o| o as f64).sum();
                // mass of the integrand sits below 1/c; large offsets push it out to ~ℓ²/x
                let scale = (1.0 / c).min(1.0 + l1 * l1 / x).max(1e-300);
                let q = semi_infinite_rel(
                    |s| {
                        let mut v = (-s * c).exp();
                        for &n in &orders {
                            if v == 0.0 {
                                break;
                            }
                            v *= bessel_ine(n, x * s);
                        }
                        v
                    },
                    scale,
                    rel,
                )?;
                Ok(q.value)
            }
            Resolvent::Brillouin { coupling } => {
                let d = offset.len();
                if coupling.fourier(&alloc::vec![0.0; d]).is_none() {
                    return Err(Error::invalid("coupling", "Fourier kernel unknown"));
                }
                let (re, im) = brillouin_integrate_complex(
                    d,
                    |p| {
                        let ups = coupling.upsilon(p).unwrap_or(0.0);
                        let phase: f64 = p.iter().zip(offset).map(|(&pj, &o)| pj * o as f64).sum();
                        let den = c + ups;
                        (phase.cos() / den, phase.sin() / den)
                    },
                    (rel / c).max(1e-15),
                )?;
                if im.abs() > 1e-12 {
                    return Err(Error::Inconsistent {
                        what: "imaginary part of the Brillouin integral",
                        discrepancy: im.abs(),
                    });
                }
                Ok(re)
            }
            Resolvent::Torus {
                torus,
                upsilon,
                momenta,
            } => {
                let n = torus.sites() as f64;
                let mut re = 0.0;
                let mut im = 0.0;
                for (p, &ups) in momenta.iter().zip(upsilon) {
                    let phase: f64 = p.iter().zip(offset).map(|(&pj, &o)| pj * o as f64).sum();
                    let den = c + ups;
                    re += phase.cos() / den;
                    im += phase.sin() / den;
                }
                if im.abs() > 1e-12 * n * (1.0 + re.abs()) {
                    return Err(Error::Inconsistent {
                        what: "imaginary part of the torus momentum sum",
                        discrepancy: im.abs() / n,
                    });
                }
                Ok(re / n)
            }
        }
    }
}

/// Matsubara sum for one `(offset, τ)` with resolvent `res` and effective `Ĵ₀`.
fn matsubara_bound(
    offset: &[i64],
    dtau: f64,
    table: &MatsubaraTable,
    j0: f64,
    res: &Resolvent<'_>,
    tol: f64,
) -> Result<f64> {
    let beta = table.beta;
    let tau = dtau - beta * (dtau / beta).floor();
    let origin = offset.iter().all(|&o| o == 0);
    let (m, gap) = (table.mass, table.gap);
    let rel = (0.05 * tol).clamp(1e-14, 1e-6);
    let closed = if origin {
        matsubara_lorentzian_sum(beta, gap, tau) / m
    } else {
        0.0
    };
    let mut sum = closed;
    let mut kappa: i64 = 0;
    let mut small_run = 0;
    let hard_cap = table.max_kappa as i64 + 1_000_000;
    loop {
        let k = table.frequency(kappa);
        let u = table.value(kappa);
        let c = 1.0 / u - j0;
        let mut term = res.eval(c, offset, rel)?;
        if origin {
            term -= 1.0 / (m * (k * k + gap * gap));
        }
        let weight = if kappa == 0 {
            1.0
        } else {
            2.0 * (k * tau).cos()
        };
        let contrib = weight * term;
        sum += contrib;
        // beyond the table the remainder decays at least like k^-6 (origin) or geometrically
        if kappa as usize >= table.max_kappa {
            if term.abs() * (1.0 + kappa as f64) <= 1e-3 * tol * sum.abs().max(f64::MIN_POSITIVE) {
                small_run += 1;
                if small_run >= 3 {
                    break;
                }
            } else {
                small_run = 0;
            }
        }
        kappa += 1;
        if kappa > hard_cap {
            return Err(Error::NoConvergence {
                iterations: kappa as usize,
                estimate: contrib.abs(),
            });
        }
    }
    Ok(sum / beta)
}

fn check_margin(table: &MatsubaraTable, j0: f64) -> Result<f64> {
    let margin = stability_margin(table, j0);
    if !(margin > 0.0) {
        return Err(Error::StabilityViolated { margin });
    }
    Ok(margin)
}

/// Infinite-volume bound `Y(ℓ, τ)`; `tol` is relative.
pub fn corr_bound(
    offset: &[i64],
    dtau: f64,
    table: &MatsubaraTable,
    coupling: &Coupling,
    d: usize,
    tol: f64,
) -> Result<f64> {
    check_inputs(offset, d, tol)?;
    let j0 = coupling.j0_hat(d);
    check_margin(table, j0)?;
    let res = infinite_resolvent(coupling)?;
    matsubara_bound(offset, dtau, table, j0, &res, tol)
}

fn check_inputs(offset: &[i64], d: usize, tol: f64) -> Result<()> {
    if offset.len() != d {
        return Err(Error::invalid("offset", "length must equal the dimension"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    Ok(())
}

fn infinite_resolvent(coupling: &Coupling) -> Result<Resolvent<'_>> {
    match coupling {
        Coupling::NearestNeighbor { j } => Ok(Resolvent::Laplace { j: *j }),
        Coupling::Kernel { .. } => Ok(Resolvent::Brillouin { coupling }),
        Coupling::General { .. } => Err(Error::invalid(
            "coupling",
            "the bound needs the Fourier kernel, not only Ĵ₀",
        )),
    }
}

/// Torus couplings `Ĵ₀^Λ` and `Υ^Λ(p)` for the periodic nearest-neighbour interaction.
fn torus_resolvent(
    coupling: &Coupling,
    d: usize,
    side: usize,
) -> Result<(f64, Resolvent<'static>)> {
    let j = coupling.nearest_neighbor_j().ok_or_else(|| {
        Error::invalid(
            "coupling",
            "finite-box bound supports nearest-neighbour coupling",
        )
    })?;
    let torus = Torus::new(d, side)?;
    // L = 2: ℓ ± e_j coincide, so each axis contributes one neighbour
    let per_axis = if side == 2 { 1.0 } else { 2.0 };
    let j0 = per_axis * d as f64 * j;
    let momenta = torus.momenta();
    let upsilon = momenta
        .iter()
        .map(|p| per_axis * j * dispersion(p))
        .collect();
    Ok((
        j0,
        Resolvent::Torus {
            torus,
            upsilon,
            momenta,
        },
    ))
}

/// Finite-box bound on the torus of side `L`; offsets are periodic.
pub fn finite_box_bound(
    offset: &[i64],
    dtau: f64,
    table: &MatsubaraTable,
    coupling: &Coupling,
    side: usize,
    tol: f64,
) -> Result<f64> {
    let d = offset.len();
    if side < 2 {
        return Err(Error::invalid("L", "must be at least 2"));
    }
    check_inputs(offset, d, tol)?;
    let (j0, res) = torus_resolvent(coupling, d, side)?;
    check_margin(table, j0)?;
    let reduced: Vec<i64> = offset.iter().map(|o| o.rem_euclid(side as i64)).collect();
    matsubara_bound(&reduced, dtau, table, j0, &res, tol)
}

/// Table of bounds on a grid of offsets and time differences.
pub fn corr_bound_table(
    offsets: &[Vec<i64>],
    dtaus: &[f64],
    table: &MatsubaraTable,
    coupling: &Coupling,
    d: usize,
    box_size: Option<usize>,
    tol: f64,
) -> Result<CorrelationBoundTable> {
    let margin;
    let mut values = Vec::with_capacity(offsets.len());
    match box_size {
        None => {
            margin = check_margin(table, coupling.j0_hat(d))?;
            for o in offsets {
                let mut row = Vec::with_capacity(dtaus.len());
                for &t in dtaus {
                    row.push(corr_bound(o, t, table, coupling, d, tol)?);
                }
                values.push(row);
            }
        }
        Some(side) => {
            let (j0, _) = torus_resolvent(coupling, d, side)?;
            margin = check_margin(table, j0)?;
            for o in offsets {
                let mut row = Vec::with_capacity(dtaus.len());
                for &t in dtaus {
                    row.push(finite_box_bound(o, t, table, coupling, side, tol)?);
                }
                values.push(row);
            }
        }
    }
    Ok(CorrelationBoundTable {
        beta: table.beta,
        dimension: d,
        box_size,
        offsets: offsets.to_vec(),
        dtaus: dtaus.to_vec(),
        values,
        max_kappa: table.max_kappa,
        tol,
        margin,
        u_source: String::from("spectral double sum"),
    })
}

/// Infrared-kernel coefficient
/// `B_ℓ = (2π)^{-d} ∫ βν/(2J E(p)) cos(p·ℓ) dp = (βν/2J) G(ℓ)`.
pub fn infrared_b(offset: &[i64], beta: f64, nu: usize, j: f64, tol: f64) -> Result<f64> {
    let d = offset.len();
    if d <= 2 {
        return Err(Error::Divergent(d));
    }
    if !(j > 0.0) || !(beta > 0.0) || nu == 0 {
        return Err(Error::invalid(
            "infrared_b",
            "beta, nu and J must be positive",
        ));
    }
    let pre = beta * nu as f64 / (2.0 * j);
    let g = green_at(offset, tol / pre)?;
    Ok(pre * g.value)
}

/// Long-range-order condition `θ f(β/(4mθ)) > J(d)/(2βJ)`.
///
/// Both sides carry the same factor `βν` relative to the Duhamel bound
/// `D_{ℓℓ} ≥ β²νθ f(β/(4mθ))` and `B_{ℓℓ} = βνJ(d)/(2J)`, so `ν` drops out.
pub fn lro_condition(theta: f64, beta: f64, j: f64, d: usize, m: f64) -> Result<bool> {
    if !(theta > 0.0 && beta > 0.0 && m > 0.0) {
        return Err(Error::invalid(
            "lro_condition",
            "theta, beta and m must be positive",
        ));
    }
    if !(j > 0.0) {
        return Ok(false);
    }
    let green = green_j(d, 1e-13)?.value;
    Ok(theta * f_implicit(beta / (4.0 * m * theta)) > green / (2.0 * beta * j))
}

/// Momentum-space infrared bound `βν/(2J E(p))` at a nonzero torus momentum.
pub fn infrared_bound_at(p: &[f64], beta: f64, nu: usize, j: f64) -> f64 {
    beta * nu as f64 / (2.0 * j * dispersion(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn upsilon_nearest_neighbour() {
        let c = Coupling::NearestNeighbor { j: 0.7 };
        assert_eq!(upsilon(&[0.0; 3], &c).unwrap(), 0.0);
        assert!((upsilon(&[PI; 3], &c).unwrap() - 4.0 * 3.0 * 0.7).abs() < 1e-13);
        assert!(upsilon(&[0.1; 3], &Coupling::General { j0_hat: 1.0 }).is_err());
    }

    #[test]
    fn harmonic_uncoupled_reproduces_exact() {
        let (m, a, beta) = (1.3, 0.8, 2.5);
        let t = MatsubaraTable::harmonic(m, a, beta, 64);
        let c = Coupling::NearestNeighbor { j: 0.0 };
        let y = corr_bound(&[0, 0, 0], 0.0, &t, &c, 3, 1e-10).unwrap();
        let w = (a / m).sqrt();
        let exact = 1.0 / ((beta * w / 2.0).tanh() * 2.0 * (a * m).sqrt());
        assert!((y - exact).abs() <= 1e-8 * exact, "{y} vs {exact}");
    }

    #[test]
    fn refuses_unstable() {
        let t = MatsubaraTable::harmonic(1.0, 1.0, 1.0, 16);
        let c = Coupling::NearestNeighbor { j: 0.2 };
        assert!(matches!(
            corr_bound(&[0, 0, 0], 0.0, &t, &c, 3, 1e-8),
            Err(Error::StabilityViolated { .. })
        ));
    }

    #[test]
    fn infrared_origin() {
        let b = infrared_b(&[0, 0, 0], 2.0, 1, 0.5, 1e-10).unwrap();
        let g = green_j(3, 1e-12).unwrap().value;
        assert!((b - 2.0 * g).abs() < 1e-9);
    }
}
