use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::action::onsite;
use super::{LoopField, SimConfig};
use crate::Result;

/// Accepted/proposed counts of the two move types.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub local_accepted: u64,
    pub local_proposed: u64,
    pub loop_accepted: u64,
    pub loop_proposed: u64,
}

impl Acceptance {
    pub fn local_rate(&self) -> f64 {
        self.local_accepted as f64 / (self.local_proposed.max(1)) as f64
    }

    pub fn loop_rate(&self) -> f64 {
        self.loop_accepted as f64 / (self.loop_proposed.max(1)) as f64
    }

    pub fn add(&mut self, other: &Acceptance) {
        self.local_accepted += other.local_accepted;
        self.local_proposed += other.local_proposed;
        self.loop_accepted += other.loop_accepted;
        self.loop_proposed += other.loop_proposed;
    }
}

/// One Markov chain: the field, its RNG stream and the move parameters.
#[derive(Debug, Clone)]
pub struct Chain {
    pub config: SimConfig,
    pub field: LoopField,
    pub step_local: f64,
    pub step_loop: f64,
    pub acceptance: Acceptance,
    rng: ChaCha8Rng,
    neighbors: Vec<Vec<usize>>,
    dt: f64,
    kin: f64,
    proposal: Vec<f64>,
}

impl Chain {
    /// Chain number `stream` of `config.seed`, started from the zero field.
    pub fn new(config: SimConfig, stream: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self::build(config, stream))
    }

    /// Like [`Chain::new`] but accepts fewer than eight slices (small test systems).
    pub fn new_small(config: SimConfig, stream: u64) -> Result<Self> {
        config.oscillator.validate()?;
        config.validate_shape()?;
        Ok(Self::build(config, stream))
    }

    fn build(config: SimConfig, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let n = config.sites();
        let neighbors = if config.coupling_j != 0.0 {
            let torus = config.torus();
            (0..n).map(|s| torus.neighbors(s)).collect()
        } else {
            alloc::vec![Vec::new(); n]
        };
        let dt = config.beta / config.slices as f64;
        let kin = config.oscillator.mass / (2.0 * dt);
        let nu = config.nu();
        Chain {
            field: LoopField::zeros(n, config.slices, nu),
            step_local: config.step_local,
            step_loop: config.step_loop,
            acceptance: Acceptance::default(),
            rng,
            neighbors,
            dt,
            kin,
            proposal: alloc::vec![0.0; nu],
            config,
        }
    }

    /// `A(x') - A(x)` when slice `t` of `site` changes to `new`.
    pub fn local_delta(&self, site: usize, t: usize, new: &[f64]) -> f64 {
        let f = &self.field;
        let p = f.slices;
        let old = f.at(site, t);
        let prev = f.at(site, (t + p - 1) % p);
        let next = f.at(site, (t + 1) % p);
        let mut dk = 0.0;
        let mut shift = 0.0;
        for c in 0..f.nu {
            let (xn, xo) = (new[c], old[c]);
            dk += (next[c] - xn).powi(2) + (xn - prev[c]).powi(2)
                - (next[c] - xo).powi(2)
                - (xo - prev[c]).powi(2);
            if !self.neighbors[site].is_empty() {
                let field_sum: f64 = self.neighbors[site].iter().map(|&n| f.at(n, t)[c]).sum();
                shift += (xn - xo) * field_sum;
            }
        }
        let spec = &self.config.oscillator;
        self.kin * dk + self.dt * (onsite(spec, new) - onsite(spec, old))
            - self.dt * self.config.coupling_j * shift
    }

    /// `A(x') - A(x)` when the whole loop of `site` is translated by `delta`.
    pub fn loop_delta(&self, site: usize, delta: &[f64]) -> f64 {
        let f = &self.field;
        let spec = &self.config.oscillator;
        let mut moved = [0.0f64; 8];
        let mut heap;
        let buf: &mut [f64] = if f.nu <= 8 {
            &mut moved[..f.nu]
        } else {
            heap = alloc::vec![0.0; f.nu];
            &mut heap
        };
        let mut du = 0.0;
        let mut coupling = 0.0;
        for t in 0..f.slices {
            let x = f.at(site, t);
            for c in 0..f.nu {
                buf[c] = x[c] + delta[c];
            }
            du += onsite(spec, buf) - onsite(spec, x);
            for &n in &self.neighbors[site] {
                let y = f.at(n, t);
                coupling += delta.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.dt * du - self.dt * self.config.coupling_j * coupling
    }

    #[inline]
    fn accept(&mut self, delta: f64) -> bool {
        delta <= 0.0 || self.rng.gen::<f64>() < (-delta).exp()
    }

    /// One pass of single-slice Metropolis updates over every (site, slice),
    /// followed by one whole-loop translation per site.
    pub fn sweep(&mut self) -> Acceptance {
        let mut acc = Acceptance::default();
        let (n, p, nu) = (self.field.sites, self.field.slices, self.field.nu);
        let mut proposal = core::mem::take(&mut self.proposal);
        for site in 0..n {
            for t in 0..p {
                for c in 0..nu {
                    let u: f64 = self.rng.gen();
                    proposal[c] = self.field.at(site, t)[c] + self.step_local * (2.0 * u - 1.0);
                }
                let delta = self.local_delta(site, t, &proposal);
                acc.local_proposed += 1;
                if self.accept(delta) {
                    self.field.at_mut(site, t).copy_from_slice(&proposal);
                    acc.local_accepted += 1;
                }
            }
        }
        if self.step_loop > 0.0 {
            for site in 0..n {
                for c in 0..nu {
                    let u: f64 = self.rng.gen();
                    proposal[c] = self.step_loop * (2.0 * u - 1.0);
                }
                let delta = self.loop_delta(site, &proposal);
                acc.loop_proposed += 1;
                if self.accept(delta) {
                    for t in 0..p {
                        for (x, s) in self.field.at_mut(site, t).iter_mut().zip(&proposal) {
                            *x += s;
                        }
                    }
                    acc.loop_accepted += 1;
                }
            }
        }
        self.proposal = proposal;
        self.acceptance.add(&acc);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::OscillatorSpec;
    use crate::pimc::discretized_action;

    fn small(slices: usize, j: f64, side: usize, dim: usize) -> SimConfig {
        SimConfig {
            dimension: dim,
            side,
            slices,
            beta: 1.5,
            oscillator: OscillatorSpec::phi4(1.0, 1.0, 1.0, 1.0).unwrap(),
            coupling_j: j,
            sweeps: 1,
            thermalization: 0,
            stride: 1,
            seed: 11,
            step_local: 0.7,
            step_loop: 0.4,
            adapt_steps: false,
            alpha: 0.5,
            chains: 1,
        }
    }

    #[test]
    fn deltas_match_full_action() {
        for (side, nu) in [(3usize, 1usize), (2, 2), (4, 3)] {
            let mut cfg = small(8, 0.35, side, 2);
            cfg.oscillator = cfg
                .oscillator
                .with_spin_dim(nu)
                .unwrap()
                .with_field(0.2)
                .unwrap();
            let mut chain = Chain::new(cfg, 0).unwrap();
            for _ in 0..3 {
                chain.sweep();
            }
            let base = discretized_action(&chain.field, &chain.config);
            let new: Vec<f64> = (0..nu).map(|c| 0.3 - 0.2 * c as f64).collect();
            let d = chain.local_delta(4 % chain.field.sites, 5, &new);
            let mut moved = chain.clone();
            moved
                .field
                .at_mut(4 % chain.field.sites, 5)
                .copy_from_slice(&new);
            let full = discretized_action(&moved.field, &chain.config) - base;
            assert!(
                (d - full).abs() < 1e-10 * (1.0 + full.abs()),
                "local {d} vs {full}"
            );

            let shift: Vec<f64> = (0..nu).map(|c| 0.1 + 0.05 * c as f64).collect();
            let d = chain.loop_delta(1, &shift);
            let mut moved = chain.clone();
            for t in 0..8 {
                for (x, s) in moved.field.at_mut(1, t).iter_mut().zip(&shift) {
                    *x += s;
                }
            }
            let full = discretized_action(&moved.field, &chain.config) - base;
            assert!(
                (d - full).abs() < 1e-10 * (1.0 + full.abs()),
                "loop {d} vs {full}"
            );
        }
    }

    #[test]
    fn vanishing_steps_always_accept() {
        let mut cfg = small(8, 0.5, 3, 2);
        cfg.step_local = 1e-12;
        cfg.step_loop = 1e-12;
        let mut chain = Chain::new(cfg, 0).unwrap();
        let acc = chain.sweep();
        assert!(acc.local_rate() > 0.999 && acc.loop_rate() > 0.999);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let cfg = small(8, 0.5, 3, 2);
        let mut a = Chain::new(cfg.clone(), 2).unwrap();
        let mut b = Chain::new(cfg, 2).unwrap();
        for _ in 0..5 {
            a.sweep();
            b.sweep();
        }
        assert_eq!(a.field, b.field);
    }

    /// Stationarity of the single-slice kernel for one site with two slices:
    /// `∫ π(x) K(x, y) g(y) = ∫ π g` by brute-force grid integration.
    #[test]
    fn kernel_preserves_gibbs_density() {
        let mut cfg = small(2, 0.0, 1, 1);
        cfg.beta = 1.0;
        cfg.oscillator = OscillatorSpec::new(1.0, 1.0, alloc::vec![-1.0, 1.0]).unwrap();
        let mut chain = Chain::new_small(cfg.clone(), 0).unwrap();
        let w = 0.8;
        let (lo, hi, n) = (-3.5, 3.5, 141usize);
        let h = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
        let action = |chain: &mut Chain, x0: f64, x1: f64| {
            chain.field.values[0] = x0;
            chain.field.values[1] = x1;
            discretized_action(&chain.field, &cfg)
        };
        let g = |x0: f64, x1: f64| x0 * x0 + 0.3 * x0 * x1 + 0.1 * x0.powi(4);
        // proposals for slice 0 on the same grid, uniform on [-w, w]
        let steps: Vec<i64> = (-((w / h) as i64)..=((w / h) as i64)).collect();
        let q = 1.0 / steps.len() as f64;
        let mut pi_g = 0.0;
        let mut pik_g = 0.0;
        let mut z = 0.0;
        for &x1 in &grid {
            for (i0, &x0) in grid.iter().enumerate() {
                let a0 = action(&mut chain, x0, x1);
                let weight = (-a0).exp();
                z += weight;
                pi_g += weight * g(x0, x1);
                let mut stay = 1.0;
                let mut moved = 0.0;
                for &s in &steps {
                    let j = i0 as i64 + s;
                    if j < 0 || j >= n as i64 {
                        // outside the grid: treated as rejected (density there is negligible)
                        continue;
                    }
                    let y0 = grid[j as usize];
                    chain.field.values[0] = x0;
                    chain.field.values[1] = x1;
                    let d = chain.local_delta(0, 0, &[y0]);
                    let alpha = if d <= 0.0 { 1.0 } else { (-d).exp() };
                    moved += q * alpha * g(y0, x1);
                    stay -= q * alpha;
                }
                pik_g += weight * (moved + stay * g(x0, x1));
            }
        }
        let (a, b) = (pi_g / z, pik_g / z);
        assert!((a - b).abs() < 1e-6 * a.abs(), "{a} vs {b}");
    }
}
