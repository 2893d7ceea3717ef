//! File formats: CSV matrices/vectors with 17-significant-digit floats and
//! '#'-prefixed header comments, the truth JSON, and the run manifest written
//! beside every output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Full-precision decimal rendering: 17 significant digits round-trip any
/// f64 exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_design_csv(path: &Path, x: &DMatrix<f64>) -> Result<()> {
    let (n, p) = x.shape();
    let mut out = String::with_capacity(n * p * 24);
    out.push_str(&format!("# n={n} p={p}\n"));
    for i in 0..n {
        let row: Vec<String> = (0..p).map(|j| format_float(x[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_vector_csv(path: &Path, y: &DVector<f64>) -> Result<()> {
    let mut out = String::with_capacity(y.len() * 24);
    out.push_str(&format!("# n={}\n", y.len()));
    for i in 0..y.len() {
        out.push_str(&format_float(y[i]));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

pub fn read_design_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in data_lines(&text).enumerate() {
        let row: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}: bad float in data row {}", path.display(), lineno + 1))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!(
                    "{}: row {} has {} fields, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let n = rows.len();
    let p = rows[0].len();
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let vals: Vec<f64> = data_lines(&text)
        .map(|l| {
            l.parse::<f64>()
                .with_context(|| format!("{}: bad float '{l}'", path.display()))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(DVector::from_vec(vals))
}

/// Planted-truth sidecar written by gen-data and consumed by diagnose and the
/// tests.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub beta_star: Vec<f64>,
    pub support: Vec<usize>,
    pub sigma: f64,
    pub seed: u64,
}

pub fn read_truth(path: &Path) -> Result<TruthFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Record of one invocation, written beside every output; the outputs are
/// reproducible from the stored argv and config snapshot alone.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command: Vec<String>,
    /// Snapshot of the effective configuration (null for file-free commands).
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

pub struct ManifestWriter {
    start: Instant,
    command: Vec<String>,
    out_dir: PathBuf,
    outputs: Vec<String>,
    config: serde_json::Value,
    seed: Option<u64>,
}

impl ManifestWriter {
    pub fn new(out_dir: &Path, command: Vec<String>) -> Self {
        Self {
            start: Instant::now(),
            command,
            out_dir: out_dir.to_path_buf(),
            outputs: Vec::new(),
            config: serde_json::Value::Null,
            seed: None,
        }
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn record(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn finish(self) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.start.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        write_json(&self.out_dir.join("manifest.json"), &manifest)
    }
}
