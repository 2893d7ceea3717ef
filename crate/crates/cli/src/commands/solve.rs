//! `solve`: compute one path and emit long-format CSV
//! (t_or_lambda, coordinate, value) sufficient to redraw the coordinate
//! trajectories, plus per-piece metadata for the exact ISS path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use iss_core::iss::{iss_path, IssOptions};
use iss_core::lasso::{lambda_max, lasso_path, GridSpec};
use iss_core::lb::{lb_run, lbiss_integrate, LbOptions, LbissOptions};

use crate::io::{format_float, write_json, ManifestWriter};
use crate::{config_error, core_error, AppResult, Method};

use super::{ensure_out_dir, load_problem};

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOpts {
    pub kappa: Option<f64>,
    pub alpha: Option<f64>,
    pub t_max: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Serialize)]
struct IssPieceMeta {
    t: f64,
    active_signs: Vec<i8>,
    nonunique: bool,
}

#[derive(Serialize)]
struct IssMeta {
    terminated: bool,
    truncated: bool,
    domain_end: f64,
    pieces: Vec<IssPieceMeta>,
}

fn push_rows(out: &mut String, key: f64, values: impl Iterator<Item = f64>) {
    for (j, v) in values.enumerate() {
        let _ = writeln!(out, "{},{j},{}", format_float(key), format_float(v));
    }
}

pub fn run(
    method: Method,
    x_path: &Path,
    y_path: &Path,
    out_dir: &Path,
    opts: SolveOpts,
    argv: &[String],
) -> AppResult<()> {
    let problem = load_problem(x_path, y_path)?;
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestWriter::new(out_dir, argv.to_vec());

    let mut csv = String::from("t_or_lambda,coordinate,value\n");
    match method {
        Method::Iss => {
            let path = iss_path(
                &problem,
                &IssOptions {
                    t_max: opts.t_max.unwrap_or(f64::INFINITY),
                    max_breakpoints: opts.max_iters.unwrap_or(2000),
                    boundary_tol: 1e-9,
                },
            )
            .map_err(core_error)?;
            for (k, &t) in path.breakpoints().iter().enumerate() {
                push_rows(&mut csv, t, path.beta_on_pieces()[k].iter().copied());
            }
            let meta = IssMeta {
                terminated: path.terminated(),
                truncated: path.truncated(),
                domain_end: path.domain_end(),
                pieces: (0..path.breakpoints().len())
                    .map(|k| IssPieceMeta {
                        t: path.breakpoints()[k],
                        active_signs: path.active_signs()[k].clone(),
                        nonunique: path.nonunique_pieces()[k],
                    })
                    .collect(),
            };
            write_json(&manifest.record("pieces.json"), &meta).map_err(config_error)?;
        }
        Method::Lb => {
            let kappa = opts.kappa.unwrap_or(64.0);
            let alpha = opts.alpha.unwrap_or(0.1 / kappa);
            let t_max = opts.t_max.unwrap_or(10.0);
            let max_iters = opts.max_iters.unwrap_or(1_000_000);
            let planned = ((t_max / alpha).ceil() as usize).min(max_iters);
            let trace = lb_run(
                &problem,
                kappa,
                alpha,
                &LbOptions {
                    max_iters,
                    t_max,
                    record_stride: (planned / 512).max(1),
                    stop_rule: None,
                },
            )
            .map_err(core_error)?;
            for rec in &trace.records {
                push_rows(&mut csv, rec.t, rec.beta.iter().copied());
            }
        }
        Method::Lbiss => {
            let kappa = opts.kappa.unwrap_or(64.0);
            let t_max = opts.t_max.unwrap_or(10.0);
            let samples: Vec<f64> = (0..=256).map(|i| t_max * i as f64 / 256.0).collect();
            let out = lbiss_integrate(
                &problem,
                kappa,
                &LbissOptions {
                    t_max,
                    sample_times: samples,
                    ..Default::default()
                },
            )
            .map_err(core_error)?;
            for (i, &t) in out.times.iter().enumerate() {
                push_rows(&mut csv, t, out.beta[i].iter().copied());
            }
            #[derive(Serialize)]
            struct Events {
                events: Vec<f64>,
                truncated: bool,
            }
            write_json(
                &manifest.record("events.json"),
                &Events {
                    events: out.events.clone(),
                    truncated: out.truncated,
                },
            )
            .map_err(config_error)?;
        }
        Method::Lasso => {
            let lmax = lambda_max(&problem).max(f64::MIN_POSITIVE);
            let lmin = match opts.t_max {
                Some(t_max) if t_max > 0.0 => (1.0 / t_max).min(lmax),
                _ => lmax * 1e-3,
            };
            let grid = GridSpec {
                lambda_max: lmax,
                lambda_min: lmin,
                count: opts.max_iters.unwrap_or(100),
                geometric: true,
            };
            let path = lasso_path(&problem, &grid).map_err(core_error)?;
            for (k, &lambda) in path.lambda_grid().iter().enumerate() {
                push_rows(&mut csv, lambda, path.solutions()[k].iter().copied());
            }
        }
    }
    fs::write(manifest.record("path.csv"), csv).map_err(config_error)?;
    manifest.finish().map_err(config_error)
}
