//! Run configuration: a TOML file with one section per module.
//!
//! Every field has an explicit default, and the resolved configuration
//! (defaults filled in) is what gets echoed into the manifest, so a manifest
//! entry parses back to exactly the configuration that produced it.

use std::path::Path;

use qcrystal_core::model::KernelTerm;
use qcrystal_core::pimc::SimConfig;
use qcrystal_core::thresholds::ClassifyOptions;
use qcrystal_core::{Coupling, LatticeModel, OscillatorSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    pub mass: f64,
    pub rigidity_a: f64,
    pub anharm_coeffs: Vec<f64>,
    pub spin_dim: usize,
    pub field_h: f64,
}

impl Default for OscillatorSection {
    /// The symmetric quartic double well `a = b = b₂ = 1`.
    fn default() -> Self {
        OscillatorSection {
            mass: 1.0,
            rigidity_a: 1.0,
            anharm_coeffs: vec![-1.0, 1.0],
            spin_dim: 1,
            field_h: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    NearestNeighbor,
    General,
    Kernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub offset: Vec<i64>,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dimension: usize,
    pub box_size: usize,
    pub beta: f64,
    pub coupling: CouplingKind,
    /// Nearest-neighbour strength.
    pub j: f64,
    /// Only used by `coupling = "general"`.
    pub j0_hat: f64,
    /// Only used by `coupling = "kernel"`.
    pub kernel: Vec<KernelEntry>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            dimension: 3,
            box_size: 4,
            beta: 4.0,
            coupling: CouplingKind::NearestNeighbor,
            j: 0.3,
            j0_hat: 0.0,
            kernel: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub n_levels: usize,
    pub tol: f64,
    /// Matsubara frequencies `|κ| ≤ max_kappa` are tabulated at `lattice.beta`.
    pub max_kappa: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            n_levels: 8,
            tol: 1e-10,
            max_kappa: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    pub dimensions: Vec<usize>,
    pub tol: f64,
    /// Also evaluate by direct Brillouin quadrature.
    pub cross_check: bool,
}

impl Default for GreenSection {
    fn default() -> Self {
        GreenSection {
            dimensions: vec![3],
            tol: 1e-10,
            cross_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySection {
    pub n_levels: usize,
    pub spectrum_tol: f64,
    pub beta_star_tol: f64,
    pub assert_uniqueness_hypotheses: bool,
}

impl Default for ClassifySection {
    fn default() -> Self {
        let o = ClassifyOptions::default();
        ClassifySection {
            n_levels: o.n_levels,
            spectrum_tol: o.spectrum_tol,
            beta_star_tol: o.beta_star_tol,
            assert_uniqueness_hypotheses: o.assert_uniqueness_hypotheses,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrBoundSection {
    /// Offsets `(n, 0, …, 0)` for `n = 0..=max_offset` along the first axis.
    pub max_offset: i64,
    /// Extra offsets, each of length `lattice.dimension`.
    pub offsets: Vec<Vec<i64>>,
    pub dtaus: Vec<f64>,
    /// Evaluate on the torus `lattice.box_size` instead of the infinite lattice.
    pub finite_box: bool,
    pub tol: f64,
}

impl Default for CorrBoundSection {
    fn default() -> Self {
        CorrBoundSection {
            max_offset: 10,
            offsets: Vec::new(),
            dtaus: vec![0.0],
            finite_box: false,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub slices: usize,
    pub sweeps: usize,
    pub thermalization: usize,
    pub stride: usize,
    pub seed: u64,
    pub step_local: f64,
    pub step_loop: f64,
    pub adapt_steps: bool,
    pub alpha: f64,
    pub chains: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            slices: 32,
            sweeps: 4000,
            thermalization: 400,
            stride: 1,
            seed: 1,
            step_local: 0.5,
            step_loop: 0.3,
            adapt_steps: true,
            alpha: 0.5,
            chains: 1,
        }
    }
}

/// The whole file. Missing sections and keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub oscillator: OscillatorSection,
    pub lattice: LatticeSection,
    pub spectrum: SpectrumSection,
    pub green: GreenSection,
    pub classify: ClassifySection,
    pub corr_bound: CorrBoundSection,
    pub simulate: SimulateSection,
}

macro_rules! section_defaults {
    ($($t:ty),*) => {$(
        impl $t {
            fn fill(v: toml::Value) -> Result<Self, toml::de::Error> {
                let mut base = toml::Value::try_from(Self::default()).expect("defaults serialize");
                merge(&mut base, v);
                base.try_into()
            }
        }
    )*};
}

section_defaults!(
    OscillatorSection,
    LatticeSection,
    SpectrumSection,
    GreenSection,
    ClassifySection,
    CorrBoundSection,
    SimulateSection
);

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        (b, o) => *b = o,
    }
}

const SECTIONS: [&str; 7] = [
    "oscillator",
    "lattice",
    "spectrum",
    "green",
    "classify",
    "corr_bound",
    "simulate",
];

impl RunConfig {
    /// Parse a config text. Keys missing from a section take that key's default;
    /// unknown sections or keys are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: toml::Table = text.parse().map_err(|e| CliError::config(format!("{e}")))?;
        Self::from_table(doc)
    }

    fn from_table(mut doc: toml::Table) -> Result<Self, CliError> {
        for key in doc.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                return Err(CliError::config(format!(
                    "unknown section `[{key}]` (expected one of {})",
                    SECTIONS.join(", ")
                )));
            }
        }
        let mut take = |name: &str| {
            doc.remove(name)
                .unwrap_or(toml::Value::Table(toml::Table::new()))
        };
        let wrap = |name: &'static str| {
            move |e: toml::de::Error| CliError::config(format!("[{name}] {}", e.message()))
        };
        Ok(RunConfig {
            oscillator: OscillatorSection::fill(take("oscillator")).map_err(wrap("oscillator"))?,
            lattice: LatticeSection::fill(take("lattice")).map_err(wrap("lattice"))?,
            spectrum: SpectrumSection::fill(take("spectrum")).map_err(wrap("spectrum"))?,
            green: GreenSection::fill(take("green")).map_err(wrap("green"))?,
            classify: ClassifySection::fill(take("classify")).map_err(wrap("classify"))?,
            corr_bound: CorrBoundSection::fill(take("corr_bound")).map_err(wrap("corr_bound"))?,
            simulate: SimulateSection::fill(take("simulate")).map_err(wrap("simulate"))?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Apply `section.key=value` overrides; `value` is parsed as a TOML value,
    /// falling back to a string.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<(), CliError> {
        if sets.is_empty() {
            return Ok(());
        }
        let mut doc = toml::Value::try_from(&*self).expect("config serializes");
        for s in sets {
            let (path, raw) = s
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("override `{s}` is not key=value")))?;
            let (section, key) = path.trim().split_once('.').ok_or_else(|| {
                CliError::config(format!("override key `{path}` must be section.key"))
            })?;
            let value = parse_value(raw.trim());
            let table = doc
                .get_mut(section)
                .and_then(|v| v.as_table_mut())
                .ok_or_else(|| CliError::config(format!("unknown section `{section}`")))?;
            if !table.contains_key(key) {
                return Err(CliError::config(format!("unknown key `{section}.{key}`")));
            }
            table.insert(key.to_string(), value);
        }
        let table = match doc {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        *self = Self::from_table(table)?;
        Ok(())
    }

    /// The resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn oscillator(&self) -> Result<OscillatorSpec, CliError> {
        let o = &self.oscillator;
        let spec = OscillatorSpec {
            mass: o.mass,
            rigidity_a: o.rigidity_a,
            anharm_coeffs: o.anharm_coeffs.clone(),
            spin_dim: o.spin_dim,
            field_h: o.field_h,
        };
        spec.validate()
            .map_err(|e| CliError::domain("oscillator", e))?;
        Ok(spec)
    }

    pub fn coupling(&self) -> Coupling {
        let l = &self.lattice;
        match l.coupling {
            CouplingKind::NearestNeighbor => Coupling::NearestNeighbor { j: l.j },
            CouplingKind::General => Coupling::General { j0_hat: l.j0_hat },
            CouplingKind::Kernel => Coupling::Kernel {
                terms: l
                    .kernel
                    .iter()
                    .map(|k| KernelTerm {
                        offset: k.offset.clone(),
                        j: k.j,
                    })
                    .collect(),
            },
        }
    }

    pub fn lattice_model(&self) -> Result<LatticeModel, CliError> {
        let m = LatticeModel {
            dimension: self.lattice.dimension,
            box_size: self.lattice.box_size,
            coupling: self.coupling(),
            beta: self.lattice.beta,
        };
        m.validate().map_err(|e| CliError::domain("lattice", e))?;
        Ok(m)
    }

    pub fn classify_options(&self) -> ClassifyOptions {
        let c = &self.classify;
        ClassifyOptions {
            n_levels: c.n_levels,
            spectrum_tol: c.spectrum_tol,
            beta_star_tol: c.beta_star_tol,
            assert_uniqueness_hypotheses: c.assert_uniqueness_hypotheses,
        }
    }

    /// The sampler configuration; the sampler supports nearest-neighbour coupling only.
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let j = match self.lattice.coupling {
            CouplingKind::NearestNeighbor => self.lattice.j,
            _ => {
                return Err(CliError::config(
                    "[lattice] simulate needs coupling = \"nearest_neighbor\"".into(),
                ))
            }
        };
        let s = &self.simulate;
        let cfg = SimConfig {
            dimension: self.lattice.dimension,
            side: self.lattice.box_size,
            slices: s.slices,
            beta: self.lattice.beta,
            oscillator: self.oscillator()?,
            coupling_j: j,
            sweeps: s.sweeps,
            thermalization: s.thermalization,
            stride: s.stride,
            seed: s.seed,
            step_local: s.step_local,
            step_loop: s.step_loop,
            adapt_steps: s.adapt_steps,
            alpha: s.alpha,
            chains: s.chains,
        };
        cfg.validate().map_err(|e| CliError::domain("pimc", e))?;
        Ok(cfg)
    }

    /// The offsets of the correlation-bound table.
    pub fn corr_offsets(&self) -> Result<Vec<Vec<i64>>, CliError> {
        let d = self.lattice.dimension;
        let mut out: Vec<Vec<i64>> = (0..=self.corr_bound.max_offset.max(0))
            .map(|n| {
                let mut v = vec![0; d];
                v[0] = n;
                v
            })
            .collect();
        for o in &self.corr_bound.offsets {
            if o.len() != d {
                return Err(CliError::config(format!(
                    "[corr_bound] offset {o:?} does not have {d} components"
                )));
            }
            out.push(o.clone());
        }
        Ok(out)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // a one-key document is the simplest way to reuse the TOML value grammar
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let c = RunConfig::parse("[lattice]\nj = 1.5\n[simulate]\nseed = 9\n").unwrap();
        assert_eq!(c.lattice.j, 1.5);
        assert_eq!(c.lattice.dimension, 3);
        assert_eq!(c.simulate.seed, 9);
        assert_eq!(c.simulate.sweeps, SimulateSection::default().sweeps);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let e = RunConfig::parse("[lattice]\nbogus = 1\n").unwrap_err();
        assert!(format!("{e}").contains("bogus"), "{e}");
        let e = RunConfig::parse("[nope]\n").unwrap_err();
        assert!(format!("{e}").contains("nope"));
        let e = RunConfig::parse("[lattice]\nj = \n").unwrap_err();
        assert!(format!("{e}").contains("line 2"), "{e}");
    }

    #[test]
    fn overrides() {
        let mut c = RunConfig::default();
        c.apply_overrides(&[
            "lattice.j=2.5".into(),
            "oscillator.anharm_coeffs=[-2.0, 1.0]".into(),
        ])
        .unwrap();
        assert_eq!(c.lattice.j, 2.5);
        assert_eq!(c.oscillator.anharm_coeffs, vec![-2.0, 1.0]);
        assert!(c.apply_overrides(&["lattice.q=1".into()]).is_err());
        assert!(c.apply_overrides(&["lattice.j=\"x\"".into()]).is_err());
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = RunConfig::default();
        c.lattice.coupling = CouplingKind::Kernel;
        c.lattice.kernel = vec![KernelEntry {
            offset: vec![1, 1, 0],
            j: 0.05,
        }];
        c.corr_bound.offsets = vec![vec![1, 2, 3]];
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }
}
