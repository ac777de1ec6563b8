//! One-site anharmonic oscillator: spectrum, gap parameter, quantum rigidity
//! and the Matsubara transform of the position two-point function.
//!
//! The Hamiltonian is `p²/(2m) + (a/2) q² + Σ_s b⁽ˢ⁾ q^{2s} - h q`. It is
//! diagonalised in a harmonic-oscillator basis whose frequency is chosen
//! variationally for the requested window of levels; in that basis every
//! polynomial term is a banded matrix.

use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::special::gamma;
use crate::{Error, Result};

fn one() -> usize {
    1
}

/// One-site model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec {
    /// Reduced mass `m = m_ph/ħ²`.
    pub mass: f64,
    /// Harmonic coefficient `a`.
    pub rigidity_a: f64,
    /// `(b⁽¹⁾, …, b⁽ʳ⁾)`, the coefficients of `q², q⁴, …, q^{2r}`.
    #[serde(default)]
    pub anharm_coeffs: Vec<f64>,
    /// Number of components `ν`; the spectral solve is always scalar.
    #[serde(default = "one")]
    pub spin_dim: usize,
    /// Linear tilt `-h q` (first component).
    #[serde(default)]
    pub field_h: f64,
}

impl OscillatorSpec {
    pub fn new(mass: f64, rigidity_a: f64, anharm_coeffs: Vec<f64>) -> Result<Self> {
        let spec = OscillatorSpec {
            mass,
            rigidity_a,
            anharm_coeffs,
            spin_dim: 1,
            field_h: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn harmonic(mass: f64, rigidity_a: f64) -> Result<Self> {
        Self::new(mass, rigidity_a, Vec::new())
    }

    /// `V(u) = -b|u|² + b₂|u|⁴`.
    pub fn phi4(mass: f64, rigidity_a: f64, b: f64, b2: f64) -> Result<Self> {
        Self::new(mass, rigidity_a, alloc::vec![-b, b2])
    }

    pub fn with_spin_dim(mut self, nu: usize) -> Result<Self> {
        self.spin_dim = nu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_field(mut self, h: f64) -> Result<Self> {
        self.field_h = h;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::invalid("mass", "must be positive and finite"));
        }
        if !(self.rigidity_a > 0.0) || !self.rigidity_a.is_finite() {
            return Err(Error::invalid("rigidity_a", "must be positive and finite"));
        }
        if self.spin_dim == 0 {
            return Err(Error::invalid("spin_dim", "must be at least 1"));
        }
        if !self.field_h.is_finite() || self.anharm_coeffs.iter().any(|b| !b.is_finite()) {
            return Err(Error::invalid(
                "anharm_coeffs",
                "coefficients must be finite",
            ));
        }
        match self.anharm_coeffs.len() {
            0 => {}
            1 => {
                let c = self.quadratic_coefficient();
                if !(c > 0.0) {
                    return Err(Error::NotConfining(c));
                }
            }
            _ => {
                let lead = *self.anharm_coeffs.last().unwrap();
                if !(lead > 0.0) {
                    return Err(Error::NotConfining(lead));
                }
            }
        }
        Ok(())
    }

    /// Highest power `r` of `q²` (one for a harmonic oscillator).
    pub fn degree(&self) -> usize {
        self.anharm_coeffs.len().max(1)
    }

    /// Coefficient of the highest power `q^{2r}`.
    pub fn leading_coefficient(&self) -> f64 {
        if self.anharm_coeffs.len() >= 2 {
            *self.anharm_coeffs.last().unwrap()
        } else {
            self.quadratic_coefficient()
        }
    }

    /// Total coefficient of `q²`, `a/2 + b⁽¹⁾`.
    pub fn quadratic_coefficient(&self) -> f64 {
        0.5 * self.rigidity_a + self.anharm_coeffs.first().copied().unwrap_or(0.0)
    }

    /// Coefficients `c_s` of `q^{2s}`, `s = 1..r`, harmonic part included.
    pub fn power_coefficients(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.degree()];
        c[0] = 0.5 * self.rigidity_a;
        for (slot, b) in c.iter_mut().zip(&self.anharm_coeffs) {
            *slot += b;
        }
        c
    }

    pub fn is_even(&self) -> bool {
        self.field_h == 0.0
    }

    pub fn is_harmonic(&self) -> bool {
        self.anharm_coeffs.iter().all(|&b| b == 0.0)
    }

    /// Anharmonic part `V` evaluated at `|x|² = r2`.
    pub fn anharmonic_radial(&self, r2: f64) -> f64 {
        let mut acc = 0.0;
        for &b in self.anharm_coeffs.iter().rev() {
            acc = (acc + b) * r2;
        }
        acc
    }

    /// Full on-site potential `(a/2)q² + V(q) - h q` for scalar `q`.
    pub fn potential(&self, q: f64) -> f64 {
        let q2 = q * q;
        0.5 * self.rigidity_a * q2 + self.anharmonic_radial(q2) - self.field_h * q
    }
}

/// Converged low-lying spectrum of one oscillator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub mass: f64,
    /// `E_0 < E_1 < …` over the computed window.
    pub energies: Vec<f64>,
    /// `Q_{nn'} = ⟨ψ_n|q|ψ_{n'}⟩`, row-major over the window.
    pub q_matrix: Vec<f64>,
    /// `⟨ψ_n|q²|ψ_n⟩` evaluated in the full basis.
    pub q2_diag: Vec<f64>,
    /// Gap parameter `Δ_m = min_n (E_n - E_{n-1})`.
    pub gap: f64,
    /// Smallest `n` attaining the minimal spacing `E_n - E_{n-1}`.
    pub gap_index: usize,
    /// Quantum rigidity `R_m = m Δ_m²`.
    pub rigidity: f64,
    pub basis_size: usize,
    pub basis_frequency: f64,
    /// Largest relative change of a reported level under the last basis refinement.
    pub convergence_estimate: f64,
    pub even: bool,
}

impl SpectrumResult {
    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    pub fn q(&self, n: usize, n2: usize) -> f64 {
        self.q_matrix[n * self.levels() + n2]
    }

    /// Normalised Boltzmann weights over the window.
    pub fn boltzmann(&self, beta: f64) -> Vec<f64> {
        let e0 = self.energies[0];
        let mut w: Vec<f64> = self
            .energies
            .iter()
            .map(|&e| (-beta * (e - e0)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= z);
        w
    }

    /// `e^{-β(E_{N-1} - E_0)}`, the weight of the last level relative to the ground state.
    pub fn truncation_weight(&self, beta: f64) -> f64 {
        (-beta * (self.energies[self.levels() - 1] - self.energies[0])).exp()
    }
}

/// Largest basis the solver will try before giving up.
pub const MAX_BASIS: usize = 1600;

/// Dimensionless position operator `(a + a†)/√2` applied to `v` (length `n`),
/// producing a vector of length `n + 1`.
fn apply_q(v: &[f64], out: &mut Vec<f64>) {
    let n = v.len();
    out.clear();
    out.resize(n + 1, 0.0);
    for i in 0..n {
        let up = libm::sqrt((i + 1) as f64 * 0.5);
        out[i + 1] += up * v[i];
        if i + 1 < n {
            out[i] += up * v[i + 1];
        }
    }
}

/// Matrix elements `(Q^{2s})_{ij}` for `i, j < size` in a sparse column sweep.
/// Calls `sink(s, i, j, value)` for every nonzero element, `s = 1..=max_power`,
/// and `sink(0, i, j, q_ij)` for the first power.
fn q_powers<F: FnMut(usize, usize, usize, f64)>(size: usize, max_power: usize, mut sink: F) {
    let ext = size + 2 * max_power + 2;
    let off: Vec<f64> = (0..ext).map(|i| libm::sqrt((i + 1) as f64 * 0.5)).collect();
    let mut cur = alloc::vec![0.0; ext];
    let mut next = alloc::vec![0.0; ext];
    for j in 0..size {
        cur.iter_mut().for_each(|x| *x = 0.0);
        cur[j] = 1.0;
        for k in 1..=(2 * max_power) {
            let lo = j.saturating_sub(k);
            let hi = (j + k).min(ext - 1);
            for i in lo..=hi {
                let mut acc = 0.0;
                if i > 0 {
                    acc += off[i - 1] * cur[i - 1];
                }
                if i + 1 < ext {
                    acc += off[i] * cur[i + 1];
                }
                next[i] = acc;
            }
            core::mem::swap(&mut cur, &mut next);
            let report = if k == 1 {
                Some(0)
            } else if k % 2 == 0 {
                Some(k / 2)
            } else {
                None
            };
            if let Some(s) = report {
                for i in lo..=hi.min(size - 1) {
                    if cur[i] != 0.0 {
                        sink(s, i, j, cur[i]);
                    }
                }
            }
            for x in next[lo..=hi].iter_mut() {
                *x = 0.0;
            }
        }
    }
}

/// Hamiltonian in the harmonic basis of frequency `freq` truncated to `size`.
fn hamiltonian(spec: &OscillatorSpec, size: usize, freq: f64) -> DMatrix<f64> {
    let m = spec.mass;
    let coeffs = spec.power_coefficients();
    let r = coeffs.len();
    let s2 = 1.0 / (m * freq);
    let scale: Vec<f64> = (0..=r).map(|k| s2.powi(k as i32)).collect();
    let lin = -spec.field_h * s2.sqrt();
    let mut h = DMatrix::<f64>::zeros(size, size);
    q_powers(size, r, |s, i, j, v| {
        if s == 0 {
            if lin != 0.0 {
                h[(i, j)] += lin * v;
            }
        } else {
            h[(i, j)] += coeffs[s - 1] * scale[s] * v;
        }
    });
    for n in 0..size {
        h[(n, n)] += 0.5 * freq * (n as f64 + 0.5);
        if n + 2 < size {
            let v = -0.25 * freq * libm::sqrt(((n + 1) * (n + 2)) as f64);
            h[(n, n + 2)] += v;
            h[(n + 2, n)] += v;
        }
    }
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Variational basis frequency: minimises the sum of the first `window`
/// diagonal elements of the Hamiltonian over `ln ω`.
fn basis_frequency(spec: &OscillatorSpec, window: usize) -> f64 {
    let coeffs = spec.power_coefficients();
    let r = coeffs.len();
    let m = spec.mass;
    // μ_s = Σ_{n<window} (Q^{2s})_{nn}
    let mut mu = alloc::vec![0.0; r + 1];
    q_powers(window, r, |s, i, j, v| {
        if s > 0 && i == j {
            mu[s] += v;
        }
    });
    let kinetic: f64 = (0..window).map(|n| 0.5 * (n as f64 + 0.5)).sum();
    let trace = |ln_w: f64| -> f64 {
        let w = ln_w.exp();
        let mut t = kinetic * w;
        for s in 1..=r {
            t += coeffs[s - 1] * mu[s] * (m * w).powi(-(s as i32));
        }
        t
    };
    let lead = spec.leading_coefficient().abs().max(1e-300);
    let center = ((2.0 * lead).ln() - r as f64 * m.ln()) / (r as f64 + 1.0);
    let (lo, hi) = (center - 8.0, center + 8.0);
    let steps = 160;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let t = trace(x);
        if t < best.1 {
            best = (x, t);
        }
    }
    let h = (hi - lo) / steps as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    for _ in 0..80 {
        if trace(c) < trace(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    (0.5 * (a + b)).exp()
}

struct Diagonalized {
    energies: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Lowest `keep` eigenpairs; even potentials are split into parity blocks.
///
/// Eigenvectors from the dense solver lose accuracy when a coupling is tiny
/// compared to the level spacing (the 2×2 deflation step cancels), so every
/// kept pair is polished by inverse iteration on its banded block and the
/// energy replaced by the Rayleigh quotient.
fn diagonalize(spec: &OscillatorSpec, size: usize, freq: f64, keep: usize) -> Result<Diagonalized> {
    let h = hamiltonian(spec, size, freq);
    let r = spec.degree();
    let blocks: Vec<(Vec<usize>, usize)> = if spec.is_even() {
        (0..2)
            .map(|p| ((p..size).step_by(2).collect(), r))
            .collect()
    } else {
        alloc::vec![((0..size).collect(), 2 * r)]
    };
    let mut found: Vec<(f64, usize, Vec<f64>)> = Vec::with_capacity(size);
    let mut mats = Vec::with_capacity(blocks.len());
    for (b, (idx, _)) in blocks.iter().enumerate() {
        let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| h[(idx[i], idx[j])]);
        let eig = SymmetricEigen::new(block.clone());
        for (k, &e) in eig.eigenvalues.iter().enumerate() {
            found.push((e, b, eig.eigenvectors.column(k).iter().copied().collect()));
        }
        mats.push(block);
    }
    if found.iter().any(|(e, _, _)| !e.is_finite()) {
        return Err(Error::Domain("non-finite eigenvalue".into()));
    }
    found.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    found.truncate(keep);
    let mut energies = Vec::with_capacity(keep);
    let mut vectors = Vec::with_capacity(keep);
    for (e, b, mut v) in found {
        let (idx, bw) = &blocks[b];
        let e = polish(&mats[b], *bw, e, &mut v);
        let mut full = alloc::vec![0.0; size];
        for (i, &row) in idx.iter().enumerate() {
            full[row] = v[i];
        }
        energies.push(e);
        vectors.push(full);
    }
    Ok(Diagonalized { energies, vectors })
}

/// Two steps of inverse iteration with shift `e` on a symmetric band matrix
/// of half-bandwidth `bw`; returns the Rayleigh quotient.
fn polish(a: &DMatrix<f64>, bw: usize, e: f64, v: &mut [f64]) -> f64 {
    let n = v.len();
    let scale = a.amax().max(1.0);
    let lu = BandLu::new(a, bw, e, scale);
    for _ in 0..2 {
        let mut x = v.to_vec();
        lu.solve(&mut x);
        let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            break;
        }
        let sign = if x.iter().zip(v.iter()).map(|(p, q)| p * q).sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (dst, src) in v.iter_mut().zip(&x) {
            *dst = sign * src / norm;
        }
    }
    let mut rq = 0.0;
    for i in 0..n {
        let lo = i.saturating_sub(bw);
        let hi = (i + bw).min(n - 1);
        let mut row = 0.0;
        for j in lo..=hi {
            row += a[(i, j)] * v[j];
        }
        rq += v[i] * row;
    }
    rq
}

/// LU with partial pivoting of `A - σ I` for a band matrix.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    lu: DMatrix<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn new(a: &DMatrix<f64>, bw: usize, shift: f64, scale: f64) -> Self {
        let n = a.nrows();
        let (kl, ku) = (bw, 2 * bw);
        let mut lu = a.clone();
        for i in 0..n {
            lu[(i, i)] -= shift;
        }
        let mut piv = alloc::vec![0; n];
        let tiny = f64::EPSILON * scale;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            for i in k + 1..=last {
                if lu[(i, k)].abs() > lu[(p, k)].abs() {
                    p = i;
                }
            }
            piv[k] = p;
            let cols = (k + ku).min(n - 1);
            if p != k {
                for j in k..=cols {
                    let t = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = t;
                }
            }
            if lu[(k, k)].abs() < tiny {
                lu[(k, k)] = if lu[(k, k)] < 0.0 { -tiny } else { tiny };
            }
            let pivot = lu[(k, k)];
            for i in k + 1..=last {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=cols {
                        lu[(i, j)] -= l * lu[(k, j)];
                    }
                }
            }
        }
        BandLu { n, kl, ku, lu, piv }
    }

    fn solve(&self, x: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                x[i] -= self.lu[(i, k)] * x[k];
            }
        }
        for k in (0..n).rev() {
            let cols = (k + self.ku).min(n - 1);
            let mut acc = x[k];
            for j in k + 1..=cols {
                acc -= self.lu[(k, j)] * x[j];
            }
            x[k] = acc / self.lu[(k, k)];
        }
    }
}

/// Solve for the lowest levels of `spec`.
///
/// The window holds `max(16, 2 n_levels)` levels. The basis grows by a
/// factor 3/2 until no level of the window moves by more than `tol`
/// (relative to `max(|E_n|, E_1 - E_0)`); the window doubles if the smallest
/// spacing sits at its upper edge.
pub fn solve_spectrum(spec: &OscillatorSpec, n_levels: usize, tol: f64) -> Result<SpectrumResult> {
    spec.validate()?;
    if n_levels < 2 {
        return Err(Error::invalid("n_levels", "need at least two levels"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    let mut window = (2 * n_levels).max(16);
    let mut refinements = 0;
    loop {
        let freq = basis_frequency(spec, window);
        let mut size = (2 * window + 32).max(64);
        let mut previous: Option<Vec<f64>> = None;
        let (diag, estimate) = loop {
            let d = diagonalize(spec, size, freq, window)?;
            refinements += 1;
            if let Some(prev) = &previous {
                let spread = (d.energies[1] - d.energies[0]).abs();
                let est = d
                    .energies
                    .iter()
                    .zip(prev)
                    .map(|(&e, &p)| (e - p).abs() / e.abs().max(spread).max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                if est <= tol {
                    break (d, est);
                }
                if size >= MAX_BASIS {
                    return Err(Error::NoConvergence {
                        iterations: refinements,
                        estimate: est,
                    });
                }
            }
            previous = Some(d.energies.clone());
            size = (size * 3 / 2).min(MAX_BASIS);
        };
        if diag.energies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(
                "levels not resolved: two eigenvalues coincide to machine precision".into(),
            ));
        }
        let spacings: Vec<f64> = diag.energies.windows(2).map(|w| w[1] - w[0]).collect();
        let min = spacings.iter().copied().fold(f64::INFINITY, f64::min);
        let gap_pos = spacings
            .iter()
            .position(|&s| s <= min * (1.0 + 1e-9))
            .unwrap();
        let gap_index = gap_pos + 1;
        if gap_index == window - 1 && window < MAX_BASIS / 4 {
            window *= 2;
            continue;
        }
        return Ok(finish(spec, diag, size, freq, estimate, min, gap_index));
    }
}

fn finish(
    spec: &OscillatorSpec,
    diag: Diagonalized,
    size: usize,
    freq: f64,
    estimate: f64,
    gap: f64,
    gap_index: usize,
) -> SpectrumResult {
    let w = diag.energies.len();
    let s = 1.0 / libm::sqrt(spec.mass * freq);
    let mut qv = Vec::new();
    let mut applied: Vec<Vec<f64>> = Vec::with_capacity(w);
    for v in &diag.vectors {
        apply_q(v, &mut qv);
        applied.push(qv.clone());
    }
    let mut q_matrix = alloc::vec![0.0; w * w];
    for i in 0..w {
        for j in 0..w {
            let dot: f64 = applied[i][..size]
                .iter()
                .zip(&diag.vectors[j])
                .map(|(a, b)| a * b)
                .sum();
            q_matrix[i * w + j] = s * dot;
        }
    }
    for i in 0..w {
        for j in 0..i {
            let avg = 0.5 * (q_matrix[i * w + j] + q_matrix[j * w + i]);
            q_matrix[i * w + j] = avg;
            q_matrix[j * w + i] = avg;
        }
        if spec.is_even() {
            q_matrix[i * w + i] = 0.0;
        }
    }
    let q2_diag = applied
        .iter()
        .map(|a| s * s * a.iter().map(|x| x * x).sum::<f64>())
        .collect();
    SpectrumResult {
        mass: spec.mass,
        energies: diag.energies,
        q_matrix,
        q2_diag,
        gap,
        gap_index,
        rigidity: spec.mass * gap * gap,
        basis_size: size,
        basis_frequency: freq,
        convergence_estimate: estimate,
        even: spec.is_even(),
    }
}

/// [`solve_spectrum`] with the level window enlarged (doubling `n_levels`, up
/// to 512) until the Boltzmann weight of the last level at `beta` is below `1e-12`.
pub fn solve_spectrum_for_beta(
    spec: &OscillatorSpec,
    beta: f64,
    n_levels: usize,
    tol: f64,
) -> Result<SpectrumResult> {
    let mut n = n_levels.max(2);
    loop {
        let s = solve_spectrum(spec, n, tol)?;
        let weight = s.truncation_weight(beta);
        if weight < 1e-12 {
            return Ok(s);
        }
        if n >= 512 {
            return Err(Error::Truncation { weight });
        }
        n *= 2;
    }
}

/// Leading-order semiclassical level
/// `[b⁽ʳ⁾/(2m)ʳ]^{1/(r+1)} [π r Γ(3/2 + 1/2r)/(Γ(3/2)Γ(1/2r)) (n + 1/2)]^{2r/(r+1)}`.
pub fn wkb_eigenvalue(spec: &OscillatorSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    if !spec.is_even() {
        return Err(Error::invalid(
            "field_h",
            "semiclassical formula needs an even potential",
        ));
    }
    let r = spec.degree() as f64;
    let b = spec.leading_coefficient();
    let prefactor = (b / (2.0 * spec.mass).powf(r)).powf(1.0 / (r + 1.0));
    let c = core::f64::consts::PI * r * gamma(1.5 + 0.5 / r) / (gamma(1.5) * gamma(0.5 / r));
    Ok(prefactor * (c * (n as f64 + 0.5)).powf(2.0 * r / (r + 1.0)))
}

/// Unitary mass rescaling to reference mass `m0`.
///
/// Returns `ρ = (m/m0)^{1/(r+1)}` and the spec of `T(ρ)`: mass `m0` and
/// every `q^{2s}` coefficient multiplied by `ρ^{r-s}` (the harmonic `a/2`
/// scales with the `q²` term). The gap satisfies `Δ(spec) = ρ^{-r} Δ(T(ρ))`.
pub fn scaled_spec(spec: &OscillatorSpec, m0: f64) -> Result<(f64, OscillatorSpec)> {
    spec.validate()?;
    if !(m0 > 0.0) {
        return Err(Error::invalid("m0", "must be positive"));
    }
    if !spec.is_even() {
        return Err(Error::invalid(
            "field_h",
            "mass scaling needs an even potential",
        ));
    }
    let r = spec.degree();
    let rho = (spec.mass / m0).powf(1.0 / (r as f64 + 1.0));
    let mut out = spec.clone();
    out.mass = m0;
    out.rigidity_a = spec.rigidity_a * rho.powi(r as i32 - 1);
    for (s, b) in out.anharm_coeffs.iter_mut().enumerate() {
        *b *= rho.powi((r - (s + 1)) as i32);
    }
    Ok((rho, out))
}

/// `û(k)` on `k = 2πκ/β`, `|κ| ≤ K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatsubaraTable {
    pub beta: f64,
    pub mass: f64,
    /// Gap of the underlying spectrum, used by the large-`k` majorant.
    pub gap: f64,
    pub max_kappa: usize,
    /// `k` for `κ = -K..=K`.
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    /// `c` in `û(k) ≈ c/k²` beyond the table; equals `1/m`.
    pub tail_coefficient: f64,
}

impl MatsubaraTable {
    pub fn frequency(&self, kappa: i64) -> f64 {
        2.0 * core::f64::consts::PI * kappa as f64 / self.beta
    }

    /// `û` at `κ`; outside the table the majorant `1/(m(k² + Δ²))`.
    pub fn value(&self, kappa: i64) -> f64 {
        let k = kappa.unsigned_abs() as usize;
        if k <= self.max_kappa {
            self.values[(kappa + self.max_kappa as i64) as usize]
        } else {
            self.majorant(kappa)
        }
    }

    /// `1/(m(k² + Δ²))`.
    pub fn majorant(&self, kappa: i64) -> f64 {
        let k = self.frequency(kappa);
        1.0 / (self.mass * (k * k + self.gap * self.gap))
    }

    /// The harmonic-form table `1/(m(k² + Δ²))` with the same frequencies.
    pub fn harmonic_majorant(&self) -> MatsubaraTable {
        let mut t = self.clone();
        let kmax = self.max_kappa as i64;
        t.values = (-kmax..=kmax).map(|k| self.majorant(k)).collect();
        t
    }

    /// Table for the harmonic oscillator, `û(k) = 1/(m k² + a)`.
    pub fn harmonic(mass: f64, rigidity_a: f64, beta: f64, max_kappa: usize) -> MatsubaraTable {
        let gap = libm::sqrt(rigidity_a / mass);
        let mut t = MatsubaraTable {
            beta,
            mass,
            gap,
            max_kappa,
            frequencies: Vec::new(),
            values: Vec::new(),
            tail_coefficient: 1.0 / mass,
        };
        let kmax = max_kappa as i64;
        t.frequencies = (-kmax..=kmax).map(|k| t.frequency(k)).collect();
        t.values = (-kmax..=kmax).map(|k| t.majorant(k)).collect();
        t
    }
}

/// Pair terms of the spectral double sum: `û(k) = Σ A/(k² + ω²)` (+ static part).
struct SpectralSum {
    weights: Vec<f64>,
    omega2: Vec<f64>,
    static_part: f64,
}

impl SpectralSum {
    fn new(spectrum: &SpectrumResult, beta: f64) -> Self {
        let p = spectrum.boltzmann(beta);
        let n = spectrum.levels();
        let mut weights = Vec::new();
        let mut omega2 = Vec::new();
        let mut static_part = 0.0;
        for i in 0..n {
            let qii = spectrum.q(i, i);
            static_part += beta * p[i] * qii * qii;
            for j in (i + 1)..n {
                let q = spectrum.q(i, j);
                let w = spectrum.energies[j] - spectrum.energies[i];
                let a = 2.0 * q * q * (p[i] - p[j]) * w;
                if a > 0.0 {
                    weights.push(a);
                    omega2.push(w * w);
                }
            }
        }
        SpectralSum {
            weights,
            omega2,
            static_part,
        }
    }

    fn at(&self, k: f64) -> f64 {
        let k2 = k * k;
        let mut s: f64 = self
            .weights
            .iter()
            .zip(&self.omega2)
            .map(|(a, w2)| a / (k2 + w2))
            .sum();
        if k == 0.0 {
            s += self.static_part;
        }
        s
    }
}

fn check_window(spectrum: &SpectrumResult, beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::invalid("beta", "must be positive"));
    }
    let weight = spectrum.truncation_weight(beta);
    if !(weight < 1e-12) {
        return Err(Error::Truncation { weight });
    }
    Ok(())
}

/// Matsubara transform `û(k)` of `⟨q e^{-τH} q e^{τH}⟩` by the spectral double sum.
pub fn matsubara_u(
    spectrum: &SpectrumResult,
    beta: f64,
    max_kappa: usize,
) -> Result<MatsubaraTable> {
    check_window(spectrum, beta)?;
    let sum = SpectralSum::new(spectrum, beta);
    let mut table = MatsubaraTable {
        beta,
        mass: spectrum.mass,
        gap: spectrum.gap,
        max_kappa,
        frequencies: Vec::new(),
        values: Vec::new(),
        tail_coefficient: 1.0 / spectrum.mass,
    };
    let kmax = max_kappa as i64;
    table.frequencies = (-kmax..=kmax).map(|k| table.frequency(k)).collect();
    let half: Vec<f64> = (0..=kmax).map(|k| sum.at(table.frequency(k))).collect();
    table.values = (-kmax..=kmax)
        .map(|k| half[k.unsigned_abs() as usize])
        .collect();
    Ok(table)
}

/// `Σ_{κ∈ℤ} cos(kτ)/(k² + w²)` with `k = 2πκ/β`, for `τ ∈ [0, β]`.
pub fn matsubara_lorentzian_sum(beta: f64, w: f64, tau: f64) -> f64 {
    if w == 0.0 {
        return f64::INFINITY;
    }
    let x = w * beta;
    // β cosh(w(β/2 - τ)) / (2w sinh(wβ/2)), written to avoid overflow
    let num = (-w * tau).exp() + (-w * (beta - tau)).exp();
    let den = 1.0 - (-x).exp();
    beta * num / (2.0 * w * den)
}

/// `⟨q²⟩` as the spectral trace, cross-checked against `(1/β) Σ_k û(k)`.
///
/// The Matsubara sum is truncated at `|κ| ≤ K` and completed with
/// `Σ_{|κ|>K} 1/(m(k² + Δ²))` in closed form; `K` doubles until the sum is
/// stable. Returns the trace.
pub fn thermal_q2(spectrum: &SpectrumResult, beta: f64) -> Result<f64> {
    check_window(spectrum, beta)?;
    let p = spectrum.boltzmann(beta);
    let trace: f64 = p.iter().zip(&spectrum.q2_diag).map(|(a, b)| a * b).sum();
    let via_sum = matsubara_q2(spectrum, beta)?;
    let discrepancy = (trace - via_sum).abs() / trace.abs();
    if !(discrepancy <= 1e-6) {
        return Err(Error::Inconsistent {
            what: "spectral trace vs Matsubara sum for <q^2>",
            discrepancy,
        });
    }
    Ok(trace)
}

/// `(1/β) Σ_k û(k)` with the closed-form harmonic tail.
pub fn matsubara_q2(spectrum: &SpectrumResult, beta: f64) -> Result<f64> {
    check_window(spectrum, beta)?;
    let sum = SpectralSum::new(spectrum, beta);
    let m = spectrum.mass;
    let gap = spectrum.gap;
    let full_tail = matsubara_lorentzian_sum(beta, gap, 0.0) / m;
    let evaluate = |kmax: i64| -> f64 {
        let mut explicit = sum.at(0.0);
        let mut lorentz = 1.0 / (m * gap * gap);
        for kappa in 1..=kmax {
            let k = 2.0 * core::f64::consts::PI * kappa as f64 / beta;
            explicit += 2.0 * sum.at(k);
            lorentz += 2.0 / (m * (k * k + gap * gap));
        }
        (explicit + (full_tail - lorentz)) / beta
    };
    let mut kmax = 64;
    let mut prev = evaluate(kmax);
    while kmax < (1 << 20) {
        kmax *= 2;
        let cur = evaluate(kmax);
        if (cur - prev).abs() <= 1e-11 * cur.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_confining() {
        assert!(matches!(
            OscillatorSpec::new(1.0, 1.0, alloc::vec![0.5, -1.0]),
            Err(Error::NotConfining(_))
        ));
        assert!(matches!(
            OscillatorSpec::new(1.0, 1.0, alloc::vec![-1.0]),
            Err(Error::NotConfining(_))
        ));
        assert!(OscillatorSpec::new(-1.0, 1.0, Vec::new()).is_err());
    }

    #[test]
    fn harmonic_ladder() {
        let spec = OscillatorSpec::harmonic(1.0, 1.0).unwrap();
        let s = solve_spectrum(&spec, 4, 1e-12).unwrap();
        for (n, e) in s.energies.iter().enumerate() {
            assert!((e - (n as f64 + 0.5)).abs() < 1e-10, "E_{n} = {e}");
        }
        assert!((s.gap - 1.0).abs() < 1e-10);
        assert!((s.rigidity - 1.0).abs() < 1e-10);
        assert_eq!(s.gap_index, 1);
        // ladder matrix elements
        assert!((s.q(0, 1).abs() - libm::sqrt(0.5)).abs() < 1e-10);
        assert!(s.q(0, 2).abs() < 1e-10);
    }

    #[test]
    fn harmonic_general_mass() {
        let spec = OscillatorSpec::harmonic(2.0, 3.0).unwrap();
        let s = solve_spectrum(&spec, 2, 1e-12).unwrap();
        assert!((s.gap - libm::sqrt(1.5)).abs() < 1e-9);
    }

    #[test]
    fn even_potential_has_vanishing_diagonal() {
        let spec = OscillatorSpec::phi4(1.0, 1.0, 1.0, 1.0).unwrap();
        let s = solve_spectrum(&spec, 4, 1e-10).unwrap();
        for n in 0..s.levels() {
            assert_eq!(s.q(n, n), 0.0);
        }
        assert!(s.gap_index < s.levels() - 1);
    }

    #[test]
    fn tilted_potential_solves() {
        let spec = OscillatorSpec::phi4(1.0, 1.0, 1.0, 1.0)
            .unwrap()
            .with_field(0.3)
            .unwrap();
        let s = solve_spectrum(&spec, 4, 1e-10).unwrap();
        assert!(s.q(0, 0) > 0.0);
        assert!(s.energies.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn wkb_mass_scaling() {
        let a = OscillatorSpec::new(1.0, 1.0, alloc::vec![0.0, 1.0]).unwrap();
        let mut b = a.clone();
        b.mass = 4.0;
        let ratio = wkb_eigenvalue(&b, 7).unwrap() / wkb_eigenvalue(&a, 7).unwrap();
        assert!((ratio - 0.25f64.powf(2.0 / 3.0)).abs() < 1e-14);
        let e0 = wkb_eigenvalue(&a, 0).unwrap();
        assert!(e0.is_finite() && e0 > 0.0);
    }

    #[test]
    fn scaled_spec_examples() {
        let spec = OscillatorSpec::phi4(1.0, 1.0, 1.0, 1.0).unwrap();
        let (rho, same) = scaled_spec(&spec, 1.0).unwrap();
        assert_eq!(rho, 1.0);
        assert_eq!(same, spec);
        let mut heavy = spec.clone();
        heavy.mass = 8.0;
        let (rho, _) = scaled_spec(&heavy, 1.0).unwrap();
        assert!((rho - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lorentzian_sum_closed_form() {
        let (beta, w) = (3.0, 0.7);
        for &tau in &[0.0, 0.4, 1.5, 3.0] {
            let mut direct = 0.0;
            for kappa in -200000i64..=200000 {
                let k = 2.0 * core::f64::consts::PI * kappa as f64 / beta;
                direct += (k * tau).cos() / (k * k + w * w);
            }
            let closed = matsubara_lorentzian_sum(beta, w, tau);
            let tol = if tau == 0.0 || tau == 3.0 { 1e-5 } else { 1e-4 };
            assert!(
                (direct - closed).abs() < tol,
                "tau={tau}: {direct} vs {closed}"
            );
        }
    }
}
