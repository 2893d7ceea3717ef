//! `diagnose`: condition constants, coherence, stopping time, and the
//! strong-signal verdict. Support-dependent fields degrade to per-field
//! error notes instead of failing the whole report.

use std::path::Path;

use serde_json::{json, Map, Value};

use iss_core::diagnostics::strong_signal_check;
use iss_core::{check_conditions, lbiss_bound_b, mutual_coherence, tau_bar, GroundTruth};
use nalgebra::DVector;

use crate::io::{read_truth, write_json, ManifestWriter};
use crate::{config_error, AppResult};

use super::{ensure_out_dir, load_problem};

fn parse_support(spec: &str, p: usize) -> anyhow::Result<Vec<usize>> {
    let mut support = Vec::new();
    for part in spec.split(',') {
        let idx: usize = part.trim().parse()?;
        if idx >= p {
            anyhow::bail!("support index {idx} out of range for p = {p}");
        }
        support.push(idx);
    }
    support.sort_unstable();
    support.dedup();
    Ok(support)
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    x_path: &Path,
    y_path: &Path,
    truth_path: Option<&Path>,
    out_dir: &Path,
    support_flag: Option<&str>,
    sigma_flag: Option<f64>,
    kappa: Option<f64>,
    argv: &[String],
) -> AppResult<()> {
    let problem = load_problem(x_path, y_path)?;
    ensure_out_dir(out_dir)?;
    let mut manifest = ManifestWriter::new(out_dir, argv.to_vec());

    let truth_file = match truth_path {
        Some(p) => Some(read_truth(p).map_err(config_error)?),
        None => None,
    };
    let truth = truth_file
        .as_ref()
        .map(|t| {
            GroundTruth::new(DVector::from_vec(t.beta_star.clone()), t.sigma)
                .map_err(crate::core_error)
        })
        .transpose()?;

    let mut report = Map::new();
    let mut errors = Map::new();
    report.insert("n".into(), json!(problem.n()));
    report.insert("p".into(), json!(problem.p()));
    report.insert("mu".into(), json!(mutual_coherence(&problem)));

    // Support: explicit flag wins, then the truth file.
    let support: Option<Vec<usize>> = match support_flag {
        Some(spec) => Some(parse_support(spec, problem.p()).map_err(config_error)?),
        None => truth.as_ref().map(|t| t.support().to_vec()),
    };
    let sigma = sigma_flag.or_else(|| truth.as_ref().map(|t| t.sigma()));
    report.insert(
        "support_source".into(),
        match (support_flag, &truth) {
            (Some(_), _) => json!("flag"),
            (None, Some(_)) => json!("truth"),
            (None, None) => Value::Null,
        },
    );

    match &support {
        None => {
            for field in ["s", "gamma", "eta", "cond_number", "tau_bar", "strong_signal"] {
                errors.insert(field.into(), json!("unavailable: no support provided"));
            }
        }
        Some(support) => {
            report.insert("s".into(), json!(support.len()));
            let bound = 1.0 / (2 * support.len().max(1) - 1) as f64;
            report.insert(
                "a3_satisfied".into(),
                json!(mutual_coherence(&problem) < bound),
            );
            match check_conditions(&problem, support) {
                Err(e) => {
                    for field in ["gamma", "eta", "cond_number", "tau_bar", "strong_signal"] {
                        errors.insert(field.into(), json!(e.to_string()));
                    }
                }
                Ok(cond) => {
                    report.insert("gamma".into(), json!(cond.gamma));
                    report.insert("gamma_max".into(), json!(cond.gamma_max));
                    report.insert("eta".into(), json!(cond.eta));
                    report.insert("cond_number".into(), json!(cond.cond_number));
                    let max_colnorm_t = problem.max_colnorm_off_support(support);
                    report.insert("max_colnorm_T".into(), json!(max_colnorm_t));
                    match sigma {
                        None => {
                            errors.insert("tau_bar".into(), json!("unavailable: no sigma"));
                        }
                        Some(sigma) => {
                            let b = match (kappa, &truth) {
                                (Some(_), Some(truth)) => {
                                    match lbiss_bound_b(&problem, truth, cond.gamma) {
                                        Ok(b) => {
                                            report.insert("lbiss_bound_B".into(), json!(b));
                                            Some(b)
                                        }
                                        Err(e) => {
                                            errors.insert(
                                                "lbiss_bound_B".into(),
                                                json!(e.to_string()),
                                            );
                                            None
                                        }
                                    }
                                }
                                _ => None,
                            };
                            let kappa_arg = if b.is_some() { kappa } else { None };
                            match tau_bar(
                                cond.eta,
                                sigma,
                                problem.n(),
                                problem.p(),
                                max_colnorm_t,
                                kappa_arg,
                                b,
                            ) {
                                Ok(t) => {
                                    report.insert("tau_bar".into(), json!(t));
                                }
                                Err(e) => {
                                    errors.insert("tau_bar".into(), json!(e.to_string()));
                                }
                            }
                        }
                    }
                    match &truth {
                        Some(truth) => {
                            report.insert(
                                "strong_signal".into(),
                                json!(strong_signal_check(
                                    &cond,
                                    truth,
                                    problem.n(),
                                    problem.p(),
                                    problem.max_colnorm_off_support(support),
                                )),
                            );
                        }
                        None => {
                            errors.insert(
                                "strong_signal".into(),
                                json!("unavailable: needs the planted truth"),
                            );
                        }
                    }
                }
            }
        }
    }

    report.insert("errors".into(), Value::Object(errors));
    write_json(&manifest.record("report.json"), &Value::Object(report)).map_err(config_error)?;
    manifest.finish().map_err(config_error)
}
