//! `gen-data`: draw one synthetic instance and write X.csv, y.csv,
//! truth.json.

use std::path::Path;

use iss_core::experiments::{generate_instance, ExperimentConfig, SignalLaw};

use crate::config::{load_config, GenDataConfig};
use crate::io::{write_design_csv, write_json, write_vector_csv, ManifestWriter, TruthFile};
use crate::{config_error, core_error, AppResult};

use super::ensure_out_dir;

pub fn run(config_path: &Path, out_dir: &Path, seed: Option<u64>, argv: &[String]) -> AppResult<()> {
    let mut cfg: GenDataConfig = load_config(config_path).map_err(config_error)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestWriter::new(out_dir, argv.to_vec());
    manifest.set_config(&cfg).map_err(config_error)?;
    manifest.set_seed(cfg.seed);

    let core_cfg = ExperimentConfig {
        n: cfg.n,
        p: cfg.p,
        s: cfg.s,
        sigma: cfg.sigma,
        signal: SignalLaw::ShiftedGaussian,
        covariance: cfg.covariance.to_core(),
        kappa_list: vec![],
        kappa_alpha: 0.1,
        reps: 1,
        seed: cfg.seed,
        stream_offset: 0,
        lasso_grid_count: 100,
        iss_max_breakpoints: 1000,
        lb_max_iters: 1,
        lb_horizon_factor: 1.0,
        lb_t_cap: 30.0,
    };
    let (problem, truth) = generate_instance(&core_cfg, 0).map_err(core_error)?;

    write_design_csv(&manifest.record("X.csv"), problem.x()).map_err(config_error)?;
    write_vector_csv(&manifest.record("y.csv"), problem.y()).map_err(config_error)?;
    write_json(
        &manifest.record("truth.json"),
        &TruthFile {
            beta_star: truth.beta_star().iter().copied().collect(),
            support: truth.support().to_vec(),
            sigma: truth.sigma(),
            seed: cfg.seed,
        },
    )
    .map_err(config_error)?;
    manifest.finish().map_err(config_error)
}
