//! Numerical laboratory for quantum anharmonic crystals.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithm of the
//! toolkit: the one-site spectral solver and its Matsubara transform, the
//! anharmonicity parameter, lattice Green's functions, the stability and
//! phase-transition thresholds, the analytic correlation bounds, and a
//! path-integral Monte Carlo sampler for the periodic Euclidean Gibbs measure.
//! File formats, configuration and the command line live in the `qcrystal`
//! crate.
//!
//! Units: `ħ = k_B = 1`; the mass is the reduced mass.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is deliberate: it rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod anharmonicity;
pub mod correlation;
mod error;
pub mod lattice_green;
pub mod model;
pub mod oscillator;
pub mod pimc;
pub mod quad;
pub mod special;
pub mod thresholds;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use model::{Coupling, LatticeModel};
pub use oscillator::{MatsubaraTable, OscillatorSpec, SpectrumResult};
