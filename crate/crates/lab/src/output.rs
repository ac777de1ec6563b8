//! File formats: JSON reports, tab-separated tables and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(tmp.display(), e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| CliError::io(tmp.display(), e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path.display(), e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// One `# `-prefixed header line, then tab-separated rows.
pub fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut text = format!("# {}\n", header.join("\t"));
    for r in rows {
        text.push_str(&r.join("\t"));
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// Full-precision float formatting for tables (round-trips through `parse`).
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn vec_label(v: &[i64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    /// The resolved configuration as TOML text; parses back to the same configuration.
    pub config: String,
    pub versions: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    pub status: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: Vec<ManifestEntry>,
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        (
            "qcrystal".to_string(),
            env!("CARGO_PKG_VERSION").to_string(),
        ),
        (
            "qcrystal-core".to_string(),
            qcrystal_core::VERSION.to_string(),
        ),
    ])
}

impl Manifest {
    pub fn path(out: &Path) -> PathBuf {
        out.join("manifest.json")
    }

    pub fn load(out: &Path) -> Result<Self, CliError> {
        let p = Self::path(out);
        match fs::read_to_string(&p) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CliError::Io(format!("{}: corrupt manifest: {e}", p.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(e) => Err(CliError::io(p.display(), e)),
        }
    }

    /// Append one entry and rewrite the manifest atomically.
    pub fn append(out: &Path, entry: ManifestEntry) -> Result<(), CliError> {
        let mut m = Self::load(out)?;
        m.runs.push(entry);
        write_json(&Self::path(out), &m)
    }
}

/// Timing and output bookkeeping for one command invocation.
pub struct Run {
    pub command: String,
    pub out: PathBuf,
    pub config: RunConfig,
    pub seed: Option<u64>,
    started: f64,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &str, out: &Path, config: RunConfig, seed: Option<u64>) -> Self {
        Run {
            command: command.to_string(),
            out: out.to_path_buf(),
            config,
            seed,
            started: now_unix(),
            outputs: Vec::new(),
        }
    }

    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn finish(self, status: &str) -> Result<(), CliError> {
        let entry = ManifestEntry {
            command: self.command,
            config: self.config.to_toml(),
            versions: versions(),
            seed: self.seed,
            started_unix: self.started,
            finished_unix: now_unix(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            status: status.to_string(),
        };
        Manifest::append(&self.out, entry)
    }
}
