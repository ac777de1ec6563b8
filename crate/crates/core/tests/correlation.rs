use proptest::prelude::*;
use qcrystal_core::correlation::{
    corr_bound, corr_bound_table, finite_box_bound, infrared_b, lro_condition, upsilon,
};
use qcrystal_core::lattice_green::green_j;
use qcrystal_core::model::{KernelTerm, Torus};
use qcrystal_core::oscillator::{matsubara_u, solve_spectrum, MatsubaraTable};
use qcrystal_core::thresholds::beta_star;
use qcrystal_core::{Coupling, Error, OscillatorSpec};
use std::f64::consts::PI;

/// `(1/β) Σ_k e^{ikτ}/(m k² + c)` in closed form, `0 ≤ τ ≤ β`.
fn lorentzian_sum(m: f64, c: f64, beta: f64, tau: f64) -> f64 {
    let w = (c / m).sqrt();
    (w * (beta / 2.0 - tau)).cosh() / (2.0 * m * w * (beta * w / 2.0).sinh())
}

/// Brute-force torus bound for a harmonic table, where every Matsubara sum
/// collapses to [`lorentzian_sum`].
fn torus_oracle(m: f64, a: f64, j: f64, beta: f64, side: usize, offset: &[i64], tau: f64) -> f64 {
    let d = offset.len();
    let torus = Torus::new(d, side).unwrap();
    let per_axis = if side == 2 { 1.0 } else { 2.0 };
    let j0 = per_axis * d as f64 * j;
    let momenta = torus.momenta();
    let sum: f64 = momenta
        .iter()
        .map(|p| {
            let ups: f64 = p.iter().map(|x| per_axis * j * (1.0 - x.cos())).sum();
            let phase: f64 = p.iter().zip(offset).map(|(x, &o)| x * o as f64).sum();
            phase.cos() * lorentzian_sum(m, a - j0 + ups, beta, tau)
        })
        .sum();
    sum / momenta.len() as f64
}

fn double_well_table(beta: f64) -> MatsubaraTable {
    let spec = OscillatorSpec::new(1.0, 1.0, vec![-1.0, 1.0]).unwrap();
    let s = solve_spectrum(&spec, 16, 1e-12).unwrap();
    matsubara_u(&s, beta, 256).unwrap()
}

/// Half of the coupling at which `û(0) Ĵ₀ = 1` in `d = 3`.
fn half_threshold(table: &MatsubaraTable) -> f64 {
    0.5 / (table.value(0) * 6.0)
}

#[test]
fn upsilon_examples() {
    let c = Coupling::NearestNeighbor { j: 0.37 };
    assert_eq!(upsilon(&[0.0; 4], &c).unwrap(), 0.0);
    assert!((upsilon(&[PI; 3], &c).unwrap() - 4.0 * 3.0 * 0.37).abs() < 1e-13);
    let kernel = Coupling::Kernel {
        terms: vec![KernelTerm {
            offset: vec![1, 1, 0],
            j: 0.2,
        }],
    };
    let p = [0.3, -1.1, 2.0];
    let direct = 2.0 * 0.2 * (1.0 - (0.3f64 - 1.1).cos());
    assert!((upsilon(&p, &kernel).unwrap() - direct).abs() < 1e-14);
    assert!(upsilon(&p, &Coupling::General { j0_hat: 1.0 }).is_err());
}

#[test]
fn uncoupled_harmonic_is_exact() {
    for (m, a, beta) in [(1.0, 1.0, 4.0), (0.5, 2.0, 1.0), (3.0, 0.2, 10.0)] {
        let t = MatsubaraTable::harmonic(m, a, beta, 64);
        let c = Coupling::NearestNeighbor { j: 0.0 };
        for tau in [0.0, 0.3 * beta] {
            let y = corr_bound(&[0, 0, 0], tau, &t, &c, 3, 1e-10).unwrap();
            let exact = lorentzian_sum(m, a, beta, tau);
            assert!((y / exact - 1.0).abs() < 1e-8, "{y} vs {exact}");
        }
    }
}

#[test]
fn finite_box_matches_brute_force() {
    let (m, a, j, beta) = (1.0, 1.0, 0.1, 2.0);
    let t = MatsubaraTable::harmonic(m, a, beta, 64);
    let c = Coupling::NearestNeighbor { j };
    for side in [2usize, 3, 5] {
        for offset in [[0i64, 0, 0], [1, 0, 0], [1, 2, 0]] {
            for tau in [0.0, 0.7] {
                let y = finite_box_bound(&offset, tau, &t, &c, side, 1e-11).unwrap();
                let o = torus_oracle(m, a, j, beta, side, &offset, tau);
                assert!(
                    (y - o).abs() < 1e-9 * o.abs().max(1e-3),
                    "L={side} {offset:?} τ={tau}: {y} vs {o}"
                );
            }
        }
    }
}

#[test]
fn bound_is_positive_even_and_decays() {
    let t = double_well_table(4.0);
    let c = Coupling::NearestNeighbor {
        j: half_threshold(&t),
    };
    let y0 = corr_bound(&[0, 0, 0], 0.0, &t, &c, 3, 1e-10).unwrap();
    assert!(y0 > 0.0);
    let a = corr_bound(&[2, -1, 0], 0.9, &t, &c, 3, 1e-10).unwrap();
    let b = corr_bound(&[-2, 1, 0], -0.9, &t, &c, 3, 1e-10).unwrap();
    assert!((a - b).abs() < 1e-10 * a.abs());
    let mut prev = y0;
    for l in 1..=6 {
        let y = corr_bound(&[l, 0, 0], 0.0, &t, &c, 3, 1e-10).unwrap();
        assert!(y > 0.0 && y < prev, "ℓ={l}");
        prev = y;
    }
}

#[test]
fn exponential_decay_fit() {
    let t = double_well_table(4.0);
    let c = Coupling::NearestNeighbor {
        j: half_threshold(&t),
    };
    let pts: Vec<(f64, f64)> = (3..=10)
        .map(|l| {
            let y = corr_bound(&[l, 0, 0], 0.0, &t, &c, 3, 1e-12).unwrap();
            (l as f64, y.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(sxy < 0.0 && r2 >= 0.99, "R² = {r2}");
}

#[test]
fn finite_box_converges_to_infinite_volume() {
    let t = double_well_table(4.0);
    let c = Coupling::NearestNeighbor {
        j: half_threshold(&t),
    };
    let inf = corr_bound(&[0, 0, 0], 0.0, &t, &c, 3, 1e-10).unwrap();
    // close to the margin the correlation length is long enough to resolve the finite-size error
    let near = Coupling::NearestNeighbor {
        j: 1.9 * half_threshold(&t),
    };
    let near_inf = corr_bound(&[0, 0, 0], 0.0, &t, &near, 3, 1e-11).unwrap();
    let near_errs: Vec<f64> = [4usize, 8, 16]
        .iter()
        .map(|&l| {
            let f = finite_box_bound(&[0, 0, 0], 0.0, &t, &near, l, 1e-11).unwrap();
            (f - near_inf).abs() / near_inf
        })
        .collect();
    assert!(
        near_errs[1] < near_errs[0] && near_errs[2] < near_errs[1],
        "{near_errs:?}"
    );
    let errs: Vec<f64> = [8usize, 16, 64]
        .iter()
        .map(|&l| {
            let f = finite_box_bound(&[0, 0, 0], 0.0, &t, &c, l, 1e-10).unwrap();
            (f - inf).abs() / inf
        })
        .collect();
    assert!(errs[2] <= 0.01, "{errs:?}");
    let small = finite_box_bound(&[1, 0, 0], 0.0, &t, &c, 2, 1e-10).unwrap();
    assert!(small.is_finite());
}

#[test]
fn torus_reflection_symmetry() {
    let t = double_well_table(2.0);
    let c = Coupling::NearestNeighbor {
        j: half_threshold(&t),
    };
    let side = 5usize;
    for o in [1i64, 2] {
        let a = finite_box_bound(&[o, 0, 0], 0.0, &t, &c, side, 1e-11).unwrap();
        let b = finite_box_bound(&[side as i64 - o, 0, 0], 0.0, &t, &c, side, 1e-11).unwrap();
        assert!((a - b).abs() < 1e-11 * a.abs().max(1.0));
    }
}

#[test]
fn majorant_gives_a_larger_bound() {
    let t = double_well_table(3.0);
    let maj = t.harmonic_majorant();
    let c = Coupling::NearestNeighbor {
        j: 0.5 * half_threshold(&maj),
    };
    for offset in [[0i64, 0, 0], [1, 0, 0], [2, 1, 0]] {
        let y = corr_bound(&offset, 0.0, &t, &c, 3, 1e-10).unwrap();
        let ym = corr_bound(&offset, 0.0, &maj, &c, 3, 1e-10).unwrap();
        assert!(ym > y, "{offset:?}: {ym} vs {y}");
    }
}

#[test]
fn table_and_refusal() {
    let t = double_well_table(2.0);
    let c = Coupling::NearestNeighbor {
        j: half_threshold(&t),
    };
    let offsets = vec![vec![0, 0, 0], vec![1, 0, 0]];
    let tab = corr_bound_table(&offsets, &[0.0, 0.5], &t, &c, 3, None, 1e-9).unwrap();
    assert_eq!(tab.values.len(), 2);
    assert!(tab.margin > 0.0 && tab.values[0][0] > tab.values[1][0]);
    let strong = Coupling::NearestNeighbor {
        j: 4.0 * half_threshold(&t),
    };
    assert!(matches!(
        corr_bound(&[0, 0, 0], 0.0, &t, &strong, 3, 1e-9),
        Err(Error::StabilityViolated { .. })
    ));
    assert!(matches!(
        finite_box_bound(&[0, 0, 0], 0.0, &t, &strong, 4, 1e-9),
        Err(Error::StabilityViolated { .. })
    ));
}

#[test]
fn infrared_coefficients() {
    let g = green_j(3, 1e-13).unwrap().value;
    let (beta, nu, j) = (3.0, 2usize, 0.4);
    let b0 = infrared_b(&[0, 0, 0], beta, nu, j, 1e-11).unwrap();
    assert!((b0 - beta * nu as f64 * g / (2.0 * j)).abs() < 1e-9);
    let half = infrared_b(&[0, 0, 0], beta, nu, 2.0 * j, 1e-11).unwrap();
    assert!((half / b0 - 0.5).abs() < 1e-10);
    let far: Vec<f64> = [1i64, 4, 16, 64]
        .iter()
        .map(|&l| infrared_b(&[l, 0, 0], beta, nu, j, 1e-11).unwrap())
        .collect();
    assert!(
        far.windows(2).all(|w| w[1] < w[0]) && far[3] < 0.02 * b0,
        "{far:?}"
    );
    assert!(matches!(
        infrared_b(&[0, 0], beta, nu, j, 1e-9),
        Err(Error::Divergent(2))
    ));
}

#[test]
fn long_range_order_condition() {
    let theta = 1.0 / 12.0;
    // 8mθ²J = 2/3 > J(3)
    let (j, m) = (12.0, 1.0);
    let bs = beta_star(j, theta, m, 3, 1e-12).unwrap();
    assert!(lro_condition(theta, 2.0 * bs, j, 3, m).unwrap());
    assert!(!lro_condition(theta, 0.99 * bs, j, 3, m).unwrap());
    for beta in [1.0, 100.0, 1e4] {
        assert!(!lro_condition(theta, beta, 1e-9, 3, m).unwrap());
    }
}

proptest! {
    #[test]
    fn nearest_neighbour_upsilon_is_the_neighbour_sum(
        p in proptest::collection::vec(-PI..PI, 3),
        j in 0.01f64..5.0,
    ) {
        let to_neighbours: f64 = p.iter().map(|x| 2.0 * j * (1.0 - x.cos())).sum();
        let u = upsilon(&p, &Coupling::NearestNeighbor { j }).unwrap();
        prop_assert!((u - to_neighbours).abs() < 1e-12 * (1.0 + u));
        prop_assert!(u >= 0.0);
    }
}
