use super::{LoopField, SimConfig};
use crate::oscillator::OscillatorSpec;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;

/// `(a/2)|x|² + V(|x|²) - h x⁽¹⁾`.
#[inline]
pub(crate) fn onsite(spec: &OscillatorSpec, x: &[f64]) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    0.5 * spec.rigidity_a * r2 + spec.anharmonic_radial(r2) - spec.field_h * x[0]
}

/// Primitive Trotter action
///
/// `A = Σ_ℓ Σ_t [ (mP/2β)|x_{ℓ,t+1} - x_{ℓ,t}|² + (β/P) U(x_{ℓ,t}) ]
///      - (β/P) J Σ_t Σ_{⟨ℓℓ'⟩} x_{ℓ,t}·x_{ℓ',t}`,
///
/// with `U` the on-site potential and `⟨ℓℓ'⟩` the distinct nearest-neighbour
/// pairs of the torus.
pub fn discretized_action(field: &LoopField, config: &SimConfig) -> f64 {
    let spec = &config.oscillator;
    let p = field.slices;
    let dt = config.beta / p as f64;
    let kin = spec.mass / (2.0 * dt);
    let mut total = 0.0;
    for site in 0..field.sites {
        for t in 0..p {
            let x = field.at(site, t);
            let y = field.at(site, (t + 1) % p);
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (b - a) * (b - a)).sum();
            total += kin * d2 + dt * onsite(spec, x);
        }
    }
    if config.coupling_j != 0.0 {
        let mut bonds = 0.0;
        for (a, b) in config.torus().edges() {
            for t in 0..p {
                bonds += field
                    .at(a, t)
                    .iter()
                    .zip(field.at(b, t))
                    .map(|(u, v)| u * v)
                    .sum::<f64>();
            }
        }
        total -= dt * config.coupling_j * bonds;
    }
    total
}

/// `λ_t = (mP/β)(2 - 2cos(2πt/P)) + βa/P`, eigenvalues of the discrete harmonic chain.
fn chain_eigenvalue(m: f64, a: f64, beta: f64, p: usize, t: usize) -> f64 {
    let pf = p as f64;
    let c = (2.0 * core::f64::consts::PI * t as f64 / pf).cos();
    m * pf / beta * (2.0 - 2.0 * c) + beta * a / pf
}

/// Exact `⟨x_t x_{t+s}⟩` per component for the `P`-slice harmonic chain.
pub fn harmonic_discrete_lag(m: f64, a: f64, beta: f64, p: usize, s: usize) -> f64 {
    let pf = p as f64;
    (0..p)
        .map(|t| {
            let phase = 2.0 * core::f64::consts::PI * (t * s) as f64 / pf;
            phase.cos() / chain_eigenvalue(m, a, beta, p, t)
        })
        .sum::<f64>()
        / pf
}

/// Exact `⟨x²⟩` per component for the `P`-slice harmonic chain.
pub fn harmonic_discrete_q2(m: f64, a: f64, beta: f64, p: usize) -> f64 {
    harmonic_discrete_lag(m, a, beta, p, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pimc::LoopField;

    fn config(side: usize, j: f64) -> SimConfig {
        SimConfig {
            dimension: 2,
            side,
            slices: 8,
            beta: 2.0,
            oscillator: OscillatorSpec::phi4(1.0, 1.0, 1.0, 1.0).unwrap(),
            coupling_j: j,
            sweeps: 1,
            thermalization: 0,
            stride: 1,
            seed: 0,
            step_local: 0.5,
            step_loop: 0.2,
            adapt_steps: false,
            alpha: 0.5,
            chains: 1,
        }
    }

    #[test]
    fn zero_field_zero_action() {
        let c = config(3, 0.4);
        let f = LoopField::zeros(9, 8, 1);
        assert_eq!(discretized_action(&f, &c), 0.0);
    }

    #[test]
    fn constant_path_single_site() {
        let mut c = config(1, 0.0);
        c.dimension = 1;
        c.oscillator = OscillatorSpec::harmonic(1.0, 1.7).unwrap();
        let mut f = LoopField::zeros(1, 8, 1);
        f.values.iter_mut().for_each(|v| *v = 0.6);
        let a = discretized_action(&f, &c);
        assert!((a - 2.0 * 0.5 * 1.7 * 0.36).abs() < 1e-14);
    }

    #[test]
    fn cyclic_slice_shift_invariance() {
        let c = config(3, 0.7);
        let mut f = LoopField::zeros(9, 8, 1);
        for (i, v) in f.values.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) * 0.1;
        }
        let mut g = f.clone();
        for s in 0..9 {
            for t in 0..8 {
                g.at_mut(s, (t + 1) % 8)[0] = f.at(s, t)[0];
            }
        }
        let (a, b) = (discretized_action(&f, &c), discretized_action(&g, &c));
        assert!((a - b).abs() < 1e-12 * a.abs());
    }

    #[test]
    fn discrete_chain_converges_to_continuum() {
        let exact = 0.5 / (2.0f64).tanh();
        let q = harmonic_discrete_q2(1.0, 1.0, 4.0, 4096);
        assert!((q - exact).abs() < 1e-6);
    }
}
