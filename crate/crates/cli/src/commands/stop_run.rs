//! `stop-run`: run a path and halt at the first point satisfying a
//! data-dependent stopping rule; emit the selected model. Exit code 4 when
//! the rule never fires before the horizon.

use std::path::Path;

use serde::Serialize;

use iss_core::diagnostics::{
    gradient_rule_threshold, residual_rule_threshold, stop_rule_gradient, stop_rule_residual,
};
use iss_core::iss::{iss_path, IssOptions};
use iss_core::lb::{lb_run, lbiss_integrate, LbOptions, LbissOptions, StopRule, StoppingReason};
use iss_core::Problem;
use nalgebra::DVector;

use crate::io::{write_json, ManifestWriter};
use crate::{config_error, core_error, AppError, AppResult, Method, Rule};

use super::{ensure_out_dir, load_problem, solve::SolveOpts, support_of};

#[derive(Serialize)]
struct SelectedModel {
    method: String,
    rule: String,
    sigma: f64,
    threshold: f64,
    fired: bool,
    stop_t: Option<f64>,
    support: Vec<usize>,
    beta: Vec<f64>,
    empty_support: bool,
}

fn rule_fires(problem: &Problem, beta: &DVector<f64>, rule: Rule, sigma: f64) -> bool {
    let r = problem.residual(beta);
    match rule {
        Rule::Residual => stop_rule_residual(&r, sigma, problem.n()),
        Rule::Gradient => stop_rule_gradient(problem, &r, sigma),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    method: Method,
    x_path: &Path,
    y_path: &Path,
    out_dir: &Path,
    rule: Rule,
    sigma: f64,
    opts: SolveOpts,
    argv: &[String],
) -> AppResult<()> {
    if !(sigma > 0.0) {
        return Err(config_error(anyhow::anyhow!(
            "stop-run needs --sigma > 0, got {sigma}"
        )));
    }
    let problem = load_problem(x_path, y_path)?;
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestWriter::new(out_dir, argv.to_vec());

    let threshold = match rule {
        Rule::Residual => residual_rule_threshold(sigma, problem.n()),
        Rule::Gradient => gradient_rule_threshold(&problem, sigma),
    };

    let hit: Option<(f64, DVector<f64>)> = match method {
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
            let mut found = None;
            for (k, beta) in path.beta_on_pieces().iter().enumerate() {
                if rule_fires(&problem, beta, rule, sigma) {
                    found = Some((path.breakpoints()[k], beta.clone()));
                    break;
                }
            }
            found
        }
        Method::Lb => {
            let kappa = opts.kappa.unwrap_or(64.0);
            let alpha = opts.alpha.unwrap_or(0.1 / kappa);
            let trace = lb_run(
                &problem,
                kappa,
                alpha,
                &LbOptions {
                    max_iters: opts.max_iters.unwrap_or(1_000_000),
                    t_max: opts.t_max.unwrap_or(f64::INFINITY),
                    record_stride: usize::MAX,
                    stop_rule: Some(match rule {
                        Rule::Residual => StopRule::Residual { sigma },
                        Rule::Gradient => StopRule::Gradient { sigma, factor: 1.0 },
                    }),
                },
            )
            .map_err(core_error)?;
            match trace.stopping_reason {
                StoppingReason::RuleResidual | StoppingReason::RuleGradient => {
                    let last = trace.last();
                    Some((last.t, last.beta.clone()))
                }
                _ => None,
            }
        }
        Method::Lbiss => {
            let kappa = opts.kappa.unwrap_or(64.0);
            let t_max = opts.t_max.unwrap_or(10.0);
            let samples: Vec<f64> = (0..=2048).map(|i| t_max * i as f64 / 2048.0).collect();
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
            out.times
                .iter()
                .zip(&out.beta)
                .find(|(_, beta)| rule_fires(&problem, beta, rule, sigma))
                .map(|(&t, beta)| (t, beta.clone()))
        }
        Method::Lasso => {
            return Err(config_error(anyhow::anyhow!(
                "stop-run applies to the time-indexed paths (iss, lb, lbiss)"
            )))
        }
    };

    let rule_name = match rule {
        Rule::Residual => "residual",
        Rule::Gradient => "gradient",
    };
    let method_name = match method {
        Method::Iss => "iss",
        Method::Lb => "lb",
        Method::Lbiss => "lbiss",
        Method::Lasso => unreachable!(),
    };
    let model = match &hit {
        Some((t, beta)) => SelectedModel {
            method: method_name.into(),
            rule: rule_name.into(),
            sigma,
            threshold,
            fired: true,
            stop_t: Some(*t),
            support: support_of(beta),
            beta: beta.iter().copied().collect(),
            empty_support: support_of(beta).is_empty(),
        },
        None => SelectedModel {
            method: method_name.into(),
            rule: rule_name.into(),
            sigma,
            threshold,
            fired: false,
            stop_t: None,
            support: Vec::new(),
            beta: vec![0.0; problem.p()],
            empty_support: true,
        },
    };
    write_json(&manifest.record("selected_model.json"), &model).map_err(config_error)?;
    manifest.finish().map_err(config_error)?;
    if hit.is_none() {
        return Err(AppError {
            code: 4,
            source: anyhow::anyhow!("stopping rule never fired before the horizon"),
        });
    }
    Ok(())
}
