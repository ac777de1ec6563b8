//! Lattice model description shared by the thresholds, bounds and sampler.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pair interaction of the crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// `J_{ℓℓ'} = J` for nearest neighbours, zero otherwise.
    NearestNeighbor { j: f64 },
    /// A general translation-invariant kernel known only through `Ĵ₀ = Σ_ℓ' J_{ℓℓ'}`.
    General { j0_hat: f64 },
    /// Finite-range kernel: each term couples `ℓ` to `ℓ ± offset` with strength `j`,
    /// so `Ĵ(p) = Σ 2 j cos(p·offset)`.
    Kernel { terms: Vec<KernelTerm> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub offset: Vec<i64>,
    pub j: f64,
}

impl Coupling {
    /// `Ĵ₀` in dimension `d` (infinite lattice).
    pub fn j0_hat(&self, d: usize) -> f64 {
        match *self {
            Coupling::NearestNeighbor { j } => 2.0 * d as f64 * j,
            Coupling::General { j0_hat } => j0_hat,
            Coupling::Kernel { ref terms } => terms.iter().map(|t| 2.0 * t.j).sum(),
        }
    }

    pub fn nearest_neighbor_j(&self) -> Option<f64> {
        match *self {
            Coupling::NearestNeighbor { j } => Some(j),
            _ => None,
        }
    }

    /// `Ĵ(p)`, when the kernel is known beyond `Ĵ₀`.
    pub fn fourier(&self, p: &[f64]) -> Option<f64> {
        match self {
            Coupling::NearestNeighbor { j } => {
                Some(2.0 * j * p.iter().map(|x| libm::cos(*x)).sum::<f64>())
            }
            Coupling::General { .. } => None,
            Coupling::Kernel { terms } => Some(
                terms
                    .iter()
                    .map(|t| {
                        let phase: f64 = t.offset.iter().zip(p).map(|(&o, &x)| o as f64 * x).sum();
                        2.0 * t.j * libm::cos(phase)
                    })
                    .sum(),
            ),
        }
    }

    /// `Υ(p) = Ĵ₀ - Ĵ(p)`.
    pub fn upsilon(&self, p: &[f64]) -> Option<f64> {
        match self {
            // 2J E(p) without cancellation
            Coupling::NearestNeighbor { j } => Some(2.0 * j * crate::lattice_green::dispersion(p)),
            _ => self.fourier(p).map(|f| self.j0_hat(p.len()) - f),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Coupling::Kernel { terms } = self {
            for t in terms {
                if t.offset.len() != d || t.offset.iter().all(|&o| o == 0) {
                    return Err(Error::invalid(
                        "coupling",
                        "kernel offsets must be nonzero vectors of length d",
                    ));
                }
                if !t.j.is_finite() {
                    return Err(Error::invalid(
                        "coupling",
                        "kernel strengths must be finite",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Lattice dimension, torus size, coupling and inverse temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    pub dimension: usize,
    pub box_size: usize,
    pub coupling: Coupling,
    pub beta: f64,
}

impl LatticeModel {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("dimension", "must be positive"));
        }
        if self.box_size < 2 {
            return Err(Error::invalid("box_size", "must be at least 2"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta", "must be positive"));
        }
        self.coupling.validate(self.dimension)?;
        let j0 = self.coupling.j0_hat(self.dimension);
        if !(j0 >= 0.0) || !j0.is_finite() {
            return Err(Error::invalid(
                "coupling",
                "Ĵ₀ must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Periodic box `Λ` of `L^d` sites, sites indexed lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Torus {
    pub dimension: usize,
    pub side: usize,
}

impl Torus {
    pub fn new(dimension: usize, side: usize) -> Result<Self> {
        if dimension == 0 || side < 2 {
            return Err(Error::invalid("torus", "need d >= 1 and L >= 2"));
        }
        Ok(Torus { dimension, side })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    pub fn coords(&self, mut site: usize) -> Vec<usize> {
        let mut c = alloc::vec![0; self.dimension];
        for slot in c.iter_mut() {
            *slot = site % self.side;
            site /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0, |acc, &c| acc * self.side + (c % self.side))
    }

    /// Site reached from `site` by the (possibly negative) displacement `offset`.
    pub fn shift(&self, site: usize, offset: &[i64]) -> usize {
        let l = self.side as i64;
        let c: Vec<usize> = self
            .coords(site)
            .iter()
            .zip(offset)
            .map(|(&x, &o)| (x as i64 + o).rem_euclid(l) as usize)
            .collect();
        self.index(&c)
    }

    /// Periodic per-axis distance `min(|x|, L - |x|)`.
    pub fn axis_distance(&self, delta: i64) -> usize {
        let l = self.side as i64;
        let r = delta.rem_euclid(l);
        r.min(l - r) as usize
    }

    /// Periodic Euclidean distance between two sites.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let s: usize = ca
            .iter()
            .zip(&cb)
            .map(|(&x, &y)| {
                let d = self.axis_distance(x as i64 - y as i64);
                d * d
            })
            .sum();
        libm::sqrt(s as f64)
    }

    /// Distinct nearest neighbours of `site` (`d` of them when `L = 2`, else `2d`).
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dimension);
        let mut offset = alloc::vec![0i64; self.dimension];
        for axis in 0..self.dimension {
            for step in [1i64, -1] {
                offset[axis] = step;
                let n = self.shift(site, &offset);
                if !out.contains(&n) {
                    out.push(n);
                }
            }
            offset[axis] = 0;
        }
        out
    }

    /// Unordered nearest-neighbour pairs at periodic distance one.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for site in 0..self.sites() {
            for n in self.neighbors(site) {
                if site < n {
                    out.push((site, n));
                }
            }
        }
        out
    }

    /// Momenta `p_j = 2π s_j/L` folded into `(-π, π]`, in site order.
    pub fn momenta(&self) -> Vec<Vec<f64>> {
        let tau = 2.0 * core::f64::consts::PI / self.side as f64;
        (0..self.sites())
            .map(|k| {
                self.coords(k)
                    .iter()
                    .map(|&s| {
                        // representative in (-π, π]
                        let p = tau * s as f64;
                        if p > core::f64::consts::PI + 1e-12 {
                            p - 2.0 * core::f64::consts::PI
                        } else {
                            p
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbours_and_edges() {
        let t = Torus::new(3, 4).unwrap();
        assert_eq!(t.neighbors(0).len(), 6);
        assert_eq!(t.edges().len(), 3 * 64);
        let t2 = Torus::new(3, 2).unwrap();
        assert_eq!(t2.neighbors(5).len(), 3);
        assert_eq!(t2.edges().len(), 3 * 8 / 2);
    }

    #[test]
    fn index_round_trip_and_distance() {
        let t = Torus::new(2, 5).unwrap();
        for s in 0..t.sites() {
            assert_eq!(t.index(&t.coords(s)), s);
        }
        let a = t.index(&[0, 0]);
        let b = t.index(&[4, 3]);
        assert!((t.distance(a, b) - libm::sqrt(1.0 + 4.0)).abs() < 1e-15);
    }
}
