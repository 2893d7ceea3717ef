//! Versioned JSON configuration schemas. Unknown keys are rejected so config
//! typos fail loudly instead of silently invalidating an experiment.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use iss_core::experiments::{Covariance, ExperimentConfig, SignalLaw};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    Identity,
    ConstantOffdiag { c: f64 },
}

impl CovarianceSpec {
    pub fn to_core(self) -> Covariance {
        match self {
            CovarianceSpec::Identity => Covariance::Identity,
            CovarianceSpec::ConstantOffdiag { c } => Covariance::ConstantOffDiagonal(c),
        }
    }
}

/// Config for `gen-data`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataConfig {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    pub covariance: CovarianceSpec,
    pub seed: u64,
}

/// Config for `experiment`; one study per entry of `sigma_list`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFileConfig {
    pub schema_version: u32,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma_list: Vec<f64>,
    pub kappa_list: Vec<f64>,
    pub kappa_alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub covariance: CovarianceSpec,
    #[serde(default = "default_lasso_grid_count")]
    pub lasso_grid_count: usize,
    #[serde(default = "default_iss_max_breakpoints")]
    pub iss_max_breakpoints: usize,
    #[serde(default = "default_lb_max_iters")]
    pub lb_max_iters: usize,
    #[serde(default = "default_lb_horizon_factor")]
    pub lb_horizon_factor: f64,
    #[serde(default = "default_lb_t_cap")]
    pub lb_t_cap: f64,
}

fn default_lasso_grid_count() -> usize {
    200
}
fn default_iss_max_breakpoints() -> usize {
    1000
}
fn default_lb_max_iters() -> usize {
    1_000_000
}
fn default_lb_horizon_factor() -> f64 {
    1.5
}
fn default_lb_t_cap() -> f64 {
    30.0
}

impl Default for ExperimentFileConfig {
    /// The benchmark study: three noise levels, 100 repetitions.
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: 80,
            p: 100,
            s: 30,
            sigma_list: vec![1.0, 2.0, 3.0],
            kappa_list: vec![4.0, 64.0, 1024.0],
            kappa_alpha: 0.1,
            reps: 100,
            seed: 0,
            covariance: CovarianceSpec::ConstantOffdiag { c: 1.0 / 300.0 },
            lasso_grid_count: default_lasso_grid_count(),
            iss_max_breakpoints: default_iss_max_breakpoints(),
            lb_max_iters: default_lb_max_iters(),
            lb_horizon_factor: default_lb_horizon_factor(),
            lb_t_cap: default_lb_t_cap(),
        }
    }
}

impl ExperimentFileConfig {
    /// Core config for one sigma row; the stream offset separates the RNG
    /// streams of the rows.
    pub fn study_config(&self, sigma_index: usize) -> ExperimentConfig {
        ExperimentConfig {
            n: self.n,
            p: self.p,
            s: self.s,
            sigma: self.sigma_list[sigma_index],
            signal: SignalLaw::ShiftedGaussian,
            covariance: self.covariance.to_core(),
            kappa_list: self.kappa_list.clone(),
            kappa_alpha: self.kappa_alpha,
            reps: self.reps,
            seed: self.seed,
            stream_offset: (sigma_index as u64) << 32,
            lasso_grid_count: self.lasso_grid_count,
            iss_max_breakpoints: self.iss_max_breakpoints,
            lb_max_iters: self.lb_max_iters,
            lb_horizon_factor: self.lb_horizon_factor,
            lb_t_cap: self.lb_t_cap,
        }
    }
}

/// Loads a config file, checking the schema version first.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let probe: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    match probe.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => bail!(
            "{}: unsupported schema_version {v}, expected {SCHEMA_VERSION}",
            path.display()
        ),
        None => bail!("{}: missing schema_version", path.display()),
    }
    // Re-parse strictly so error messages carry line/column positions.
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
