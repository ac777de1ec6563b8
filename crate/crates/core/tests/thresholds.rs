use proptest::prelude::*;
use qcrystal_core::lattice_green::green_j;
use qcrystal_core::thresholds::{
    beta_star, classify, f_implicit, grr_constant, grr_mass_bound, high_temp_uniqueness, phi_beta,
    Verdict,
};
use qcrystal_core::{Coupling, Error, LatticeModel, OscillatorSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const THETA: f64 = 1.0 / 12.0;

fn j3() -> f64 {
    green_j(3, 1e-13).unwrap().value
}

fn nn_model(d: usize, j: f64) -> LatticeModel {
    LatticeModel {
        dimension: d,
        box_size: 8,
        coupling: Coupling::NearestNeighbor { j },
        beta: 1.0,
    }
}

#[test]
fn implicit_f_examples() {
    assert_eq!(f_implicit(0.0), 1.0);
    let t = 1f64.tanh();
    assert!((f_implicit(t) - t).abs() < 1e-12);
    for i in 0..=440 {
        let t = 6.0 + 0.1 * i as f64;
        assert!((f_implicit(t) - 1.0 / t).abs() <= 1e-5, "t={t}");
    }
}

#[test]
fn implicit_f_round_trip() {
    let n = 2000;
    for i in 0..=n {
        // log grid on [1e-3, 50]
        let u = 1e-3 * (50.0f64 / 1e-3).powf(i as f64 / n as f64);
        let back = f_implicit(u * u.tanh()) * u;
        assert!(
            (back - u.tanh()).abs() <= 1e-10 * u.tanh().max(1e-300),
            "u={u}"
        );
    }
}

#[test]
fn implicit_f_shape() {
    let ts: Vec<f64> = (0..1000).map(|i| 1e-3 + 0.02 * i as f64).collect();
    let fs: Vec<f64> = ts.iter().map(|&t| f_implicit(t)).collect();
    for i in 1..ts.len() {
        assert!(fs[i] < fs[i - 1]);
        // t f(t) = tanh²u rises to 1; strict growth is only resolvable below 1 - 1e-12, a few ulps above
        let (g, g0) = (ts[i] * fs[i], ts[i - 1] * fs[i - 1]);
        assert!(
            g <= 1.0
                && if g0 < 1.0 - 1e-12 {
                    g > g0
                } else {
                    g >= g0 - 4.0 * f64::EPSILON
                },
            "t={} g={g:e} g0={g0:e}",
            ts[i]
        );
    }
    for i in 1..ts.len() - 1 {
        // uniform grid second difference
        assert!(fs[i + 1] - 2.0 * fs[i] + fs[i - 1] > -1e-15, "t={}", ts[i]);
    }
}

#[test]
fn phi_beta_limits_and_monotonicity() {
    let (j, m) = (2.0, 1.5);
    assert!(phi_beta(1e-12, j, THETA, m) < 1e-10);
    let limit = 8.0 * m * j * THETA * THETA;
    assert!((phi_beta(1e6, j, THETA, m) / limit - 1.0).abs() < 1e-4);
    let grid: Vec<f64> = (1..=100).map(|i| 0.05 * i as f64).collect();
    for w in grid.windows(2) {
        assert!(phi_beta(w[1], j, THETA, m) > phi_beta(w[0], j, THETA, m));
    }
}

#[test]
fn beta_star_residual_and_refusal() {
    let green = j3();
    let j = 2.0 * green / (8.0 * THETA * THETA);
    let bs = beta_star(j, THETA, 1.0, 3, 1e-12).unwrap();
    assert!((phi_beta(bs, j, THETA, 1.0) - green).abs() <= 1e-10);

    let weak = 0.9 * green / (8.0 * THETA * THETA);
    match beta_star(weak, THETA, 1.0, 3, 1e-12) {
        Err(Error::NoThreshold { deficit }) => assert!(deficit < 0.0),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn beta_star_diverges_at_critical_mass() {
    let green = j3();
    let j = 1.0;
    let mc = green / (8.0 * THETA * THETA * j);
    let mut prev = 0.0;
    let eps_grid = [1.0, 0.1, 1e-2, 1e-4, 1e-6, 1e-8];
    let mut values = vec![];
    for eps in eps_grid {
        let bs = beta_star(j, THETA, mc * (1.0 + eps), 3, 1e-12).unwrap();
        assert!(bs > prev, "eps={eps}");
        prev = bs;
        values.push(bs);
    }
    // φ(β) approaches its limit like e^{-cβ}, so β* grows like ln(1/ε)
    let slope = (values[5] - values[3]) / (1e-4f64.ln() - 1e-8f64.ln());
    assert!(slope > 0.0 && values[5] > 3.0 * values[0], "{values:?}");
}

#[test]
fn harmonic_crystal_follows_the_rigidity_rule() {
    for (m, a, j) in [(1.0, 1.0, 0.1), (2.0, 3.0, 0.2), (1.0, 1.0, 0.2)] {
        let spec = OscillatorSpec::harmonic(m, a).unwrap();
        let c = classify(&nn_model(3, j), &spec).unwrap();
        assert!((c.gap - (a / m).sqrt()).abs() < 1e-8);
        let stable = 6.0 * j < a;
        assert_eq!(
            c.verdict == Verdict::UniqueAllBeta,
            stable,
            "m={m} a={a} j={j}"
        );
        assert!(c.theta_star.is_none());
    }
}

#[test]
fn double_well_verdicts() {
    let spec = OscillatorSpec::new(1.0, 1.0, vec![-1.0, 1.0]).unwrap();
    // 8 d m θ*² J = 0.5
    let j = 0.5 / (8.0 * 3.0 * THETA * THETA);
    let c = classify(&nn_model(3, j), &spec).unwrap();
    assert!((c.stability_lhs.unwrap() - 0.5).abs() < 1e-12);
    if c.j0_hat < c.rigidity {
        assert_eq!(c.verdict, Verdict::UniqueAllBeta);
        assert!(c.uniqueness_hypotheses);
    } else {
        assert_ne!(c.verdict, Verdict::TransitionAboveBetaStar);
    }
    let c = classify(&nn_model(3, 100.0 * j), &spec).unwrap();
    assert_eq!(c.verdict, Verdict::TransitionAboveBetaStar);
    let bs = c.beta_star.unwrap();
    assert!(bs.is_finite() && bs > 0.0);
    assert!(c.beta_star_residual.unwrap() <= 1e-10);
}

#[test]
fn classifier_exclusivity_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0usize; 3];
    for _ in 0..1000 {
        let m = 10f64.powf(rng.gen_range(-1.0..1.0));
        let a = rng.gen_range(0.2..2.0);
        let b1 = -rng.gen_range(0.0..2.0) * a;
        let b2 = rng.gen_range(0.1..2.0);
        let j = 10f64.powf(rng.gen_range(-3.0..1.5));
        let d = rng.gen_range(3..6);
        let spec = OscillatorSpec::new(m, a, vec![b1, b2]).unwrap();
        let c = classify(&nn_model(d, j), &spec).unwrap();
        let stable = c.stability_margin > 0.0;
        let transition = c.transition_margin.is_some_and(|t| t > 0.0);
        assert!(
            !(stable && transition),
            "both conditions at m={m} a={a} b1={b1} b2={b2} j={j}"
        );
        match c.verdict {
            Verdict::UniqueAllBeta => {
                counts[0] += 1;
                assert!(c.j0_hat < c.rigidity && c.uniqueness_hypotheses);
            }
            Verdict::TransitionAboveBetaStar => {
                counts[1] += 1;
                assert!(transition && c.beta_star_residual.unwrap() <= 1e-10);
            }
            Verdict::Indeterminate => counts[2] += 1,
        }
    }
    // the sweep must actually visit both decided regimes
    assert!(counts[0] > 0 && counts[1] > 0, "{counts:?}");
}

#[test]
fn high_temperature_criterion() {
    for beta in [0.1, 1.0, 100.0] {
        assert!(high_temp_uniqueness(1.0, 0.5, 0.0, 1.2, beta).unwrap());
        assert!(!high_temp_uniqueness(1.0, 0.5, 0.0, 1.6, beta).unwrap());
        assert!(high_temp_uniqueness(1.0, 0.0, 0.0, 0.9, beta).unwrap());
    }
    assert!(high_temp_uniqueness(1.0, 0.5, 0.3, 1.0, 0.1).unwrap());
    assert!(!high_temp_uniqueness(1.0, 0.5, 0.3, 1.0, 50.0).unwrap());
    assert!(high_temp_uniqueness(-1.0, 0.5, 0.0, 1.0, 1.0).is_err());
    assert!(high_temp_uniqueness(1.0, 0.5, 0.0, 0.0, 1.0).is_err());
}

#[test]
fn grr_constant_values() {
    // σ = 0.2, p = 2, ν = 1: 2^15 (1 + 2.5)^4 / (0.2 · 1.2) · 2² Γ(3/2)/Γ(1/2)
    let expected = 32768.0 * 3.5f64.powi(4) / (0.2 * 1.2) * 4.0 * 0.5;
    let v = grr_constant(0.2, 2, 1).unwrap();
    assert!((v / expected - 1.0).abs() < 1e-13, "{v} vs {expected}");
    let r = grr_constant(0.2, 2, 3).unwrap() / v;
    assert!((r - 3.0).abs() < 1e-12);
    // pole at p - 1 - 2σp → 0⁺, i.e. σ → 1/4 for p = 2
    let near = grr_constant(0.25 - 1e-9, 2, 1).unwrap();
    assert!(near > 1e7 * v);
    assert!(grr_constant(0.3, 2, 1).is_err());
}

#[test]
fn grr_mass_bound_examples() {
    let (n, c, eps) = (3usize, 2.0, 0.5);
    let beta = n as f64 * (c - eps) * (c - eps);
    assert!((grr_mass_bound(beta, n, c, eps, 2, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
    let a = grr_mass_bound(1.0, n, c, eps, 2, 0.3, 5.0).unwrap();
    let b = grr_mass_bound(1.0, n, c, eps, 2, 0.6, 5.0).unwrap();
    assert!(b < a);
    let twice = grr_mass_bound(2.0, n, c, eps, 2, 0.3, 5.0).unwrap();
    assert!((twice / a - 2.0).abs() < 1e-14);
    assert!(grr_mass_bound(1.0, n, c, 3.0, 2, 0.3, 5.0).is_err());
}

proptest! {
    #[test]
    fn f_bracketed_by_elementary_bounds(t in 1e-6f64..1e4) {
        // u ∈ [max(√t, t), (t + √(t²+4t))/2] translates into bounds on f = t/u²
        let f = f_implicit(t);
        let u = (t / f).sqrt();
        prop_assert!((u * u.tanh() - t).abs() <= 1e-10 * t);
        prop_assert!(f > 0.0 && f <= 1.0);
    }
}
