//! Lattice dispersion `E(p)` and the lattice Green's function
//! `J(d) = (2π)^{-d} ∫ dp / E(p)`.
//!
//! Two independent routes:
//!
//! * Laplace–Bessel: `1/E = ∫_0^∞ e^{-tE} dt` factorises the Brillouin
//!   integral into `∫_0^∞ [e^{-t} I_0(t)]^d dt`, a one-dimensional integral
//!   computed by double-exponential quadrature on `[0, 1]` and on the mapped
//!   tail `t = 1/x²`.
//! * Brillouin cube: the `d`-dimensional integral itself, with the cube split
//!   into `2^d · d` pyramids whose apex sits at `p = 0`. In pyramid
//!   coordinates `p = r (u, 1)` the volume element carries `r^{d-1}`, which
//!   cancels the `1/|p|²` singularity, so a tensor Gauss–Legendre rule
//!   converges geometrically.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::quad::{gauss_legendre_on, semi_infinite, Quadrature};
use crate::special::{bessel_i0e, bessel_ine};
use crate::{Error, Result};

/// `E(p) = Σ_j (1 - cos p_j)`, evaluated as `Σ 2 sin²(p_j/2)`.
pub fn dispersion(p: &[f64]) -> f64 {
    p.iter()
        .map(|&x| {
            let s = (0.5 * x).sin();
            2.0 * s * s
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMethod {
    LaplaceBessel,
    BrillouinQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenResult {
    pub dimension: usize,
    pub value: f64,
    pub abs_error_estimate: f64,
    pub method: GreenMethod,
}

/// `J(d)` by the Laplace–Bessel representation.
pub fn green_j(d: usize, tol: f64) -> Result<GreenResult> {
    if d <= 2 {
        return Err(Error::Divergent(d));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let q = semi_infinite(|t| bessel_i0e(t).powi(d as i32), 1.0, tol)?;
    finish(d, q, GreenMethod::LaplaceBessel, tol)
}

fn finish(d: usize, q: Quadrature, method: GreenMethod, tol: f64) -> Result<GreenResult> {
    if !(q.abs_error <= tol) {
        return Err(Error::Accuracy {
            target: tol,
            achieved: q.abs_error,
        });
    }
    Ok(GreenResult {
        dimension: d,
        value: q.value,
        abs_error_estimate: q.abs_error,
        method,
    })
}

/// `J(d)` by direct quadrature over the Brillouin zone (practical for `d ≤ 4`).
pub fn green_j_brillouin(d: usize, tol: f64) -> Result<GreenResult> {
    if d <= 2 {
        return Err(Error::Divergent(d));
    }
    // by symmetry one orthant and one pyramid suffice for 1/E
    let q = pyramid_rule(d, tol, true, &|p: &[f64]| [1.0 / dispersion(p), 0.0])?;
    finish(
        d,
        Quadrature {
            value: q.0[0],
            abs_error: q.1,
        },
        GreenMethod::BrillouinQuadrature,
        tol,
    )
}

/// Lattice Green's function at a lattice offset,
/// `G(ℓ) = (2π)^{-d} ∫ cos(p·ℓ)/E(p) dp = ∫_0^∞ Π_j e^{-t} I_{ℓ_j}(t) dt`.
pub fn green_at(offset: &[i64], tol: f64) -> Result<Quadrature> {
    let d = offset.len();
    if d <= 2 {
        return Err(Error::Divergent(d));
    }
    let orders: Vec<u32> = offset.iter().map(|o| o.unsigned_abs() as u32).collect();
    let l2: f64 = orders.iter().map(|&o| (o as f64) * (o as f64)).sum();
    semi_infinite(
        |t| orders.iter().map(|&n| bessel_ine(n, t)).product(),
        l2.max(1.0),
        tol,
    )
}

/// `(2π)^{-d} ∫_{(-π,π]^d} f(p) dp` for integrands with at worst a `1/|p|²`
/// singularity at the origin.
pub fn brillouin_integrate<F: Fn(&[f64]) -> f64>(d: usize, f: F, tol: f64) -> Result<f64> {
    let (v, _) = pyramid_rule(d, tol, false, &|p: &[f64]| [f(p), 0.0])?;
    Ok(v[0])
}

/// Complex version of [`brillouin_integrate`]; `f` returns `(re, im)`.
pub fn brillouin_integrate_complex<F: Fn(&[f64]) -> (f64, f64)>(
    d: usize,
    f: F,
    tol: f64,
) -> Result<(f64, f64)> {
    let (v, _) = pyramid_rule(d, tol, false, &|p: &[f64]| {
        let (re, im) = f(p);
        [re, im]
    })?;
    Ok((v[0], v[1]))
}

/// Budget on integrand evaluations per refinement level.
const MAX_POINTS: usize = 60_000_000;

/// Pyramid (Duffy) product rule; grows the Gauss–Legendre order by 3/2 until
/// two successive orders agree to `tol`. With `symmetric`, the integrand is
/// assumed invariant under sign flips and permutations of `p`.
fn pyramid_rule(
    d: usize,
    tol: f64,
    symmetric: bool,
    f: &dyn Fn(&[f64]) -> [f64; 2],
) -> Result<([f64; 2], f64)> {
    if d == 0 {
        return Err(Error::invalid("d", "must be positive"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut n = 8usize;
    let mut prev: Option<[f64; 2]> = None;
    loop {
        let pieces = if symmetric { 1 } else { (1usize << d) * d };
        let points = pieces.saturating_mul(n.saturating_pow(d as u32));
        if points > MAX_POINTS {
            let achieved = prev.map_or(f64::INFINITY, |_| f64::NAN);
            return Err(Error::Accuracy {
                target: tol,
                achieved,
            });
        }
        let v = pyramid_level(d, n, symmetric, f);
        if let Some(p) = prev {
            let err = (v[0] - p[0]).abs().max((v[1] - p[1]).abs());
            if err <= tol {
                return Ok((v, err));
            }
            if (n * 3 / 2).saturating_pow(d as u32).saturating_mul(pieces) > MAX_POINTS {
                return Err(Error::Accuracy {
                    target: tol,
                    achieved: err,
                });
            }
        }
        prev = Some(v);
        n = n * 3 / 2;
    }
}

fn pyramid_level(d: usize, n: usize, symmetric: bool, f: &dyn Fn(&[f64]) -> [f64; 2]) -> [f64; 2] {
    let (rx, rw) = gauss_legendre_on(n, 0.0, PI);
    let (ux, uw) = gauss_legendre_on(n, 0.0, 1.0);
    let mut p = alloc::vec![0.0; d];
    let mut idx = alloc::vec![0usize; d - 1];
    let (orthants, apexes) = if symmetric {
        (1usize, 1usize)
    } else {
        (1usize << d, d)
    };
    let mut total = [0.0; 2];
    for orthant in 0..orthants {
        for k in 0..apexes {
            let mut piece = [0.0; 2];
            for (&r, &wr) in rx.iter().zip(&rw) {
                let radial = wr * r.powi(d as i32 - 1);
                idx.iter_mut().for_each(|i| *i = 0);
                let mut inner = [0.0; 2];
                loop {
                    let mut w = radial;
                    let mut slot = 0;
                    for (j, pj) in p.iter_mut().enumerate() {
                        let v = if j == k {
                            r
                        } else {
                            let i = idx[slot];
                            slot += 1;
                            w *= uw[i];
                            r * ux[i]
                        };
                        *pj = if orthant >> j & 1 == 1 { -v } else { v };
                    }
                    let fx = f(&p);
                    inner[0] += w * fx[0];
                    inner[1] += w * fx[1];
                    // odometer
                    let mut c = 0;
                    while c < d - 1 {
                        idx[c] += 1;
                        if idx[c] < n {
                            break;
                        }
                        idx[c] = 0;
                        c += 1;
                    }
                    if c == d - 1 {
                        break;
                    }
                }
                piece[0] += inner[0];
                piece[1] += inner[1];
            }
            total[0] += piece[0];
            total[1] += piece[1];
        }
    }
    let norm = if symmetric {
        (d as f64) * (1u64 << d) as f64 / (2.0 * PI).powi(d as i32)
    } else {
        1.0 / (2.0 * PI).powi(d as i32)
    };
    [total[0] * norm, total[1] * norm]
}

/// The outer bounds `1/(d - 1/2) < J(d) < 1/(d - 1)`, valid for `d ≥ 4`.
pub fn green_bounds(d: usize) -> (f64, f64) {
    let d = d as f64;
    (1.0 / (d - 0.5), 1.0 / (d - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_values() {
        assert_eq!(dispersion(&[0.0, 0.0, 0.0]), 0.0);
        assert!((dispersion(&[PI; 4]) - 8.0).abs() < 1e-14);
        let p = [1e-3, -2e-3];
        assert!((dispersion(&p) - 0.5 * (1e-6 + 4e-6)).abs() < 1e-12);
    }

    #[test]
    fn watson_value() {
        let g = green_j(3, 1e-10).unwrap();
        assert!((g.value - 0.505462019717323).abs() < 1e-9, "{}", g.value);
    }

    #[test]
    fn low_dimensions_diverge() {
        assert!(matches!(green_j(2, 1e-8), Err(Error::Divergent(2))));
        assert!(matches!(
            green_j_brillouin(1, 1e-8),
            Err(Error::Divergent(1))
        ));
    }

    #[test]
    fn normalisation() {
        let one = brillouin_integrate(3, |_| 1.0, 1e-12).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offset_zero_matches_j() {
        let a = green_at(&[0, 0, 0], 1e-11).unwrap().value;
        let b = green_j(3, 1e-11).unwrap().value;
        assert!((a - b).abs() < 1e-10);
    }
}
