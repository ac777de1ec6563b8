//! Path-integral Monte Carlo for the periodic Euclidean Gibbs measure.
//!
//! Each site carries a loop `x_ℓ(τ)`, discretised on `P` imaginary-time
//! slices of width `β/P` with `x_{ℓ,P} ≡ x_{ℓ,0}`. The weight is `e^{-A}` with
//! the primitive Trotter action of [`discretized_action`]. A chain is
//! strictly sequential; independent chains (distinct RNG streams of the same
//! seed) can be run in parallel and merged with [`merge_reports`].

mod action;
mod observables;
mod sampler;
pub mod stats;

pub use action::{discretized_action, harmonic_discrete_lag, harmonic_discrete_q2};
pub use observables::{
    analytic_comparisons, evaluate_checks, merge_reports, run_chain, run_chain_with,
    AnalyticComparisons, Check, InfraredEntry, LagEntry, OffsetEntry, SimReport,
};
pub use sampler::{Acceptance, Chain};
pub use stats::{jackknife2, Estimate};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::model::Torus;
use crate::oscillator::OscillatorSpec;
use crate::{Error, Result};

fn default_alpha() -> f64 {
    0.5
}

fn default_chains() -> usize {
    1
}

/// Everything a simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dimension: usize,
    /// Sites per axis `L`.
    pub side: usize,
    /// Imaginary-time slices `P`.
    pub slices: usize,
    pub beta: f64,
    pub oscillator: OscillatorSpec,
    /// Nearest-neighbour coupling `J` (periodic).
    pub coupling_j: f64,
    pub sweeps: usize,
    pub thermalization: usize,
    /// Sweeps between measurements.
    pub stride: usize,
    pub seed: u64,
    /// Half-width of the single-slice proposal cube.
    pub step_local: f64,
    /// Half-width of the whole-loop translation cube.
    pub step_loop: f64,
    /// Retune the step widths toward 50% acceptance during thermalization.
    #[serde(default)]
    pub adapt_steps: bool,
    /// Exponent of the `|Λ|^{1+α}` order-parameter normalisation.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Number of independent chains (streams); merged by the caller.
    #[serde(default = "default_chains")]
    pub chains: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.oscillator.validate()?;
        if self.slices < 8 {
            return Err(Error::invalid("slices", "need at least 8 time slices"));
        }
        self.validate_shape()
    }

    /// Checks everything except the lower bound on the slice count.
    pub(crate) fn validate_shape(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        if self.side < 2 && !(self.side == 1 && self.coupling_j == 0.0) {
            return Err(Error::invalid("side", "need L >= 2"));
        }
        if self.slices < 2 {
            return Err(Error::invalid("slices", "need at least 2 time slices"));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::invalid("beta", "must be positive"));
        }
        if !self.coupling_j.is_finite() {
            return Err(Error::invalid("coupling_j", "must be finite"));
        }
        if self.sweeps == 0 || self.stride == 0 {
            return Err(Error::invalid(
                "sweeps",
                "sweeps and stride must be positive",
            ));
        }
        if !(self.step_local > 0.0) || !(self.step_loop >= 0.0) {
            return Err(Error::invalid("step_local", "step widths must be positive"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("chains", "must be at least 1"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        Ok(())
    }

    pub fn torus(&self) -> Torus {
        Torus {
            dimension: self.dimension,
            side: self.side,
        }
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    pub fn nu(&self) -> usize {
        self.oscillator.spin_dim
    }
}

/// Loop configuration `x[site][slice][component]`, stored flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopField {
    pub sites: usize,
    pub slices: usize,
    pub nu: usize,
    pub values: Vec<f64>,
}

impl LoopField {
    pub fn zeros(sites: usize, slices: usize, nu: usize) -> Self {
        LoopField {
            sites,
            slices,
            nu,
            values: alloc::vec![0.0; sites * slices * nu],
        }
    }

    #[inline]
    pub fn offset(&self, site: usize, slice: usize) -> usize {
        (site * self.slices + slice) * self.nu
    }

    #[inline]
    pub fn at(&self, site: usize, slice: usize) -> &[f64] {
        let o = self.offset(site, slice);
        &self.values[o..o + self.nu]
    }

    #[inline]
    pub fn at_mut(&mut self, site: usize, slice: usize) -> &mut [f64] {
        let o = self.offset(site, slice);
        &mut self.values[o..o + self.nu]
    }

    /// Path of one site, `slices × nu`.
    pub fn path(&self, site: usize) -> &[f64] {
        let o = self.offset(site, 0);
        &self.values[o..o + self.slices * self.nu]
    }
}
