//! `experiment`: the mean-AUC study. Emits per-repetition rows, the
//! aggregated table mirroring the benchmark layout, and a JSON summary.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::json;

use iss_core::experiments::run_auc_study;

use crate::config::{load_config, ExperimentFileConfig};
use crate::io::{format_float, write_json, ManifestWriter};
use crate::{config_error, core_error, AppResult};

use super::ensure_out_dir;

pub fn run(
    config_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
    argv: &[String],
) -> AppResult<()> {
    let mut cfg: ExperimentFileConfig = match config_path {
        Some(path) => load_config(path).map_err(config_error)?,
        None => ExperimentFileConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if cfg.sigma_list.is_empty() {
        return Err(config_error(anyhow::anyhow!("sigma_list must be nonempty")));
    }
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestWriter::new(out_dir, argv.to_vec());
    manifest.set_config(&cfg).map_err(config_error)?;
    manifest.set_seed(cfg.seed);

    let mut rows_csv = String::from("method,kappa,sigma,rep,auc\n");
    let mut table_csv = String::from("sigma,method,kappa,mean_auc,std_auc,reps\n");
    let mut cells_json = Vec::new();
    for sigma_index in 0..cfg.sigma_list.len() {
        let study_cfg = cfg.study_config(sigma_index);
        let study = run_auc_study(&study_cfg).map_err(core_error)?;
        for row in &study.rows {
            let _ = writeln!(
                rows_csv,
                "{},{},{},{},{}",
                row.method,
                row.kappa.map(|k| k.to_string()).unwrap_or_default(),
                row.sigma,
                row.rep,
                format_float(row.auc),
            );
        }
        for cell in &study.cells {
            let _ = writeln!(
                table_csv,
                "{},{},{},{},{},{}",
                cell.sigma,
                cell.method,
                cell.kappa.map(|k| k.to_string()).unwrap_or_default(),
                format_float(cell.mean_auc),
                format_float(cell.std_auc),
                cell.reps,
            );
            cells_json.push(json!({
                "sigma": cell.sigma,
                "method": cell.method,
                "kappa": cell.kappa,
                "mean_auc": cell.mean_auc,
                "std_auc": cell.std_auc,
                "reps": cell.reps,
                "failures": cell.failures,
            }));
        }
    }
    fs::write(manifest.record("rows.csv"), rows_csv).map_err(config_error)?;
    fs::write(manifest.record("table.csv"), table_csv).map_err(config_error)?;

    let degenerate = cfg.reps == 1;
    let summary = json!({
        "config": serde_json::to_value(&cfg).map_err(config_error)?,
        "cells": cells_json,
        "degenerate_std": degenerate,
        "footnotes": if degenerate {
            vec!["std_auc is 0 because reps = 1".to_string()]
        } else {
            Vec::new()
        },
    });
    write_json(&manifest.record("summary.json"), &summary).map_err(config_error)?;
    manifest.finish().map_err(config_error)
}
