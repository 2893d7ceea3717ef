//! Synthetic instance generation, selection-order ROC/AUC metrics, the
//! mean-AUC study over ISS / LB / LASSO paths, and sign-consistency trials.
//!
//! Reproducibility contract: every repetition draws from its own
//! counter-derived ChaCha stream, so repetitions are order independent and
//! the study aggregates in fixed ascending order regardless of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::iss::{iss_path, IssOptions, IssPath};
use crate::lasso::{lasso_path, GridSpec, LassoPath};
use crate::lb::{lb_run, LbOptions, LbTrace, StopRule};
use crate::model::{check_conditions, tau_bar, GroundTruth, Problem};

/// Row covariance of the design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance {
    Identity,
    /// Unit diagonal, constant `c` off the diagonal.
    ConstantOffDiagonal(f64),
}

/// Law of the planted nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalLaw {
    /// `beta_j = r_j + sign(r_j)` with `r_j ~ N(0, 1)`: magnitudes >= 1.
    ShiftedGaussian,
}

/// Configuration of one study (one noise level).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma: f64,
    pub signal: SignalLaw,
    pub covariance: Covariance,
    pub kappa_list: Vec<f64>,
    /// The product kappa * alpha held fixed across the kappa list.
    pub kappa_alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// Distinguishes RNG streams between studies sharing a seed.
    pub stream_offset: u64,
    pub lasso_grid_count: usize,
    pub iss_max_breakpoints: usize,
    pub lb_max_iters: usize,
    /// LB horizon as a multiple of the last ISS breakpoint of the instance.
    pub lb_horizon_factor: f64,
    /// Absolute ceiling on the LB horizon. Late entries do not change the
    /// selection order in any measurable way (the ordering differences live
    /// at small t), and the uncapped tail can be five decades long.
    pub lb_t_cap: f64,
}

impl ExperimentConfig {
    /// The benchmark setup: n = 80, p = 100, first s = 30 coordinates
    /// nonzero, nearly-identity covariance with off-diagonal 1/(3p),
    /// kappa in {4, 64, 1024} at kappa*alpha = 0.1.
    pub fn benchmark(sigma: f64, reps: usize, seed: u64) -> Self {
        let p = 100;
        Self {
            n: 80,
            p,
            s: 30,
            sigma,
            signal: SignalLaw::ShiftedGaussian,
            covariance: Covariance::ConstantOffDiagonal(1.0 / (3.0 * p as f64)),
            kappa_list: vec![4.0, 64.0, 1024.0],
            kappa_alpha: 0.1,
            reps,
            seed,
            stream_offset: 0,
            lasso_grid_count: 200,
            iss_max_breakpoints: 1000,
            lb_max_iters: 1_000_000,
            lb_horizon_factor: 1.5,
            lb_t_cap: 30.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.s > self.p {
            return Err(Error::InvalidInput(format!(
                "s = {} exceeds p = {}",
                self.s, self.p
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be >= 1".into()));
        }
        if !(self.kappa_alpha > 0.0) {
            return Err(Error::InvalidInput("kappa_alpha must be positive".into()));
        }
        if let Covariance::ConstantOffDiagonal(c) = self.covariance {
            if !(c < 1.0) || !(1.0 + (self.p as f64 - 1.0) * c > 0.0) {
                return Err(Error::CovarianceNotPd(format!(
                    "constant off-diagonal {c} with p = {}",
                    self.p
                )));
            }
        }
        Ok(())
    }
}

/// Per-repetition RNG: one counter-derived stream per (seed, offset, rep).
fn rep_rng(config: &ExperimentConfig, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream_offset.wrapping_add(rep as u64));
    rng
}

/// Draws one instance: rows of X i.i.d. `N(0, Sigma_p)` through the lower
/// Cholesky factor, the first `s` coefficients from the signal law, and
/// `y = X beta* + sigma eps`. Also returns the realized noise vector.
pub fn generate_instance_with_noise(
    config: &ExperimentConfig,
    rep: usize,
) -> Result<(Problem, GroundTruth, DVector<f64>)> {
    config.validate()?;
    let mut rng = rep_rng(config, rep);
    let (n, p, s) = (config.n, config.p, config.s);

    let mut beta_star = DVector::zeros(p);
    for j in 0..s {
        match config.signal {
            SignalLaw::ShiftedGaussian => {
                let r: f64 = rng.sample(StandardNormal);
                // sign(0) treated as +1 so the magnitude floor of 1 holds.
                let shift = if r >= 0.0 { 1.0 } else { -1.0 };
                beta_star[j] = r + shift;
            }
        }
    }

    let g = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = match config.covariance {
        Covariance::Identity => g,
        Covariance::ConstantOffDiagonal(c) => {
            let sigma_p = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { c });
            let chol = sigma_p
                .cholesky()
                .ok_or_else(|| Error::CovarianceNotPd(format!("off-diagonal {c}")))?;
            // Row x_i = L g_i, i.e. X = G L^T.
            g * chol.l().transpose()
        }
    };

    let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = &x * &beta_star + &eps * config.sigma;
    let problem = Problem::new(x, y)?;
    let truth = GroundTruth::new(beta_star, config.sigma)?;
    truth.validate_for(&problem)?;
    Ok((problem, truth, eps))
}

/// [`generate_instance_with_noise`] without the realized noise.
pub fn generate_instance(config: &ExperimentConfig, rep: usize) -> Result<(Problem, GroundTruth)> {
    generate_instance_with_noise(config, rep).map(|(p, t, _)| (p, t))
}

/// A coordinate's first entry into the model along a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionEvent {
    pub coordinate: usize,
    /// Entry key: time t for ISS, t_k for LB, 1/lambda for LASSO. Smaller
    /// means selected earlier.
    pub time: f64,
}

/// Anything that can report when each coordinate first became nonzero.
pub trait SelectionPath {
    /// Entry key per coordinate (see [`SelectionEvent::time`]); `None` for
    /// never-selected coordinates.
    fn entry_keys(&self) -> Vec<Option<f64>>;
}

impl SelectionPath for IssPath {
    fn entry_keys(&self) -> Vec<Option<f64>> {
        self.first_entry_times()
    }
}

impl SelectionPath for LbTrace {
    fn entry_keys(&self) -> Vec<Option<f64>> {
        self.first_entry_times()
    }
}

impl SelectionPath for LassoPath {
    fn entry_keys(&self) -> Vec<Option<f64>> {
        self.first_entry_lambdas()
            .into_iter()
            .map(|l| l.map(|lambda| 1.0 / lambda))
            .collect()
    }
}

/// Ordered first-entry events: ascending entry key, ties by coordinate
/// index; never-selected coordinates are absent.
pub fn selection_order<P: SelectionPath + ?Sized>(path: &P) -> Vec<SelectionEvent> {
    order_from_keys(&path.entry_keys())
}

fn order_from_keys(keys: &[Option<f64>]) -> Vec<SelectionEvent> {
    let mut events: Vec<SelectionEvent> = keys
        .iter()
        .enumerate()
        .filter_map(|(coordinate, key)| key.map(|time| SelectionEvent { coordinate, time }))
        .collect();
    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .unwrap()
            .then(a.coordinate.cmp(&b.coordinate))
    });
    events
}

/// ROC curve and area for a selection order against the planted support.
#[derive(Debug, Clone)]
pub struct RocResult {
    pub events: Vec<SelectionEvent>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

/// Sweeps the selection order, closing the curve by ranking never-selected
/// coordinates last in ascending index order, and integrates by trapezoid.
pub fn roc_auc(order: &[SelectionEvent], truth: &GroundTruth) -> Result<RocResult> {
    let p = truth.beta_star().len();
    let s = truth.sparsity();
    let t = p - s;
    if s == 0 || t == 0 {
        return Err(Error::InvalidInput(format!(
            "ROC needs both classes nonempty: |S| = {s}, |T| = {t}"
        )));
    }
    let in_s = crate::model::membership(p, truth.support());
    let mut seen = vec![false; p];
    let mut ranking: Vec<usize> = Vec::with_capacity(p);
    for e in order {
        if e.coordinate >= p || seen[e.coordinate] {
            return Err(Error::InvalidInput(
                "selection order repeats or exceeds the coordinate range".into(),
            ));
        }
        seen[e.coordinate] = true;
        ranking.push(e.coordinate);
    }
    for j in 0..p {
        if !seen[j] {
            ranking.push(j);
        }
    }

    let mut fpr = vec![0.0];
    let mut tpr = vec![0.0];
    // Staircase area as an exact pair count: each rightward step at height
    // tp/s contributes tp of the s*t orderable (signal, noise) pairs.
    let mut ordered_pairs = 0usize;
    let (mut tp, mut fp) = (0usize, 0usize);
    for &j in &ranking {
        if in_s[j] {
            tp += 1;
        } else {
            fp += 1;
            ordered_pairs += tp;
        }
        fpr.push(fp as f64 / t as f64);
        tpr.push(tp as f64 / s as f64);
    }
    Ok(RocResult {
        events: order.to_vec(),
        fpr,
        tpr,
        auc: ordered_pairs as f64 / (s * t) as f64,
    })
}

/// One per-repetition AUC observation.
#[derive(Debug, Clone)]
pub struct AucRow {
    pub method: String,
    pub kappa: Option<f64>,
    pub sigma: f64,
    pub rep: usize,
    pub auc: f64,
}

/// Aggregated mean and sample standard deviation for one method.
#[derive(Debug, Clone)]
pub struct AucCell {
    pub method: String,
    pub kappa: Option<f64>,
    pub sigma: f64,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub reps: usize,
    pub failures: usize,
}

/// Study output: raw rows plus aggregated cells, in fixed method order
/// (LB by ascending kappa, then ISS, then LASSO).
#[derive(Debug, Clone)]
pub struct AucStudy {
    pub rows: Vec<AucRow>,
    pub cells: Vec<AucCell>,
}

fn method_list(config: &ExperimentConfig) -> Vec<(String, Option<f64>)> {
    let mut methods: Vec<(String, Option<f64>)> = config
        .kappa_list
        .iter()
        .map(|&k| ("lb".to_string(), Some(k)))
        .collect();
    methods.push(("iss".to_string(), None));
    methods.push(("lasso".to_string(), None));
    methods
}

/// First-entry times of the discrete LB iteration, computed through cached
/// Gram products: `z_{k+1} = z_k + alpha (X^T y / n - (X^T X / n) beta_k)`.
/// Same recursion as [`lb_run`] up to the reassociated matrix products; used
/// by the study where only the selection order matters.
fn lb_first_entries(
    gram: &DMatrix<f64>,
    xty_n: &DVector<f64>,
    kappa: f64,
    alpha: f64,
    t_max: f64,
    max_iters: usize,
) -> Result<Vec<Option<f64>>> {
    let p = gram.nrows();
    let mut z = DVector::<f64>::zeros(p);
    let mut beta = DVector::<f64>::zeros(p);
    let mut grad = xty_n.clone();
    let mut first_entry: Vec<Option<f64>> = vec![None; p];
    let mut active: Vec<usize> = Vec::with_capacity(p);
    let mut k = 0usize;
    while k < max_iters && (k + 1) as f64 * alpha <= t_max {
        z.axpy(alpha, &grad, 1.0);
        k += 1;
        let t = k as f64 * alpha;
        // beta update; track which coordinates changed to keep the gradient
        // maintenance proportional to the active set.
        active.clear();
        let mut worst = 0.0_f64;
        for i in 0..p {
            let b = kappa * crate::model::shrink_scalar(z[i], 1.0);
            worst = worst.max(z[i].abs());
            if b != beta[i] {
                active.push(i);
            }
            if b != 0.0 && first_entry[i].is_none() {
                first_entry[i] = Some(t);
            }
        }
        if !worst.is_finite() || worst > 1e80 {
            return Err(Error::Divergence {
                iter: k,
                observed: f64::NAN,
            });
        }
        for &i in &active {
            let b = kappa * crate::model::shrink_scalar(z[i], 1.0);
            grad.axpy(beta[i] - b, &gram.column(i), 1.0);
            beta[i] = b;
        }
    }
    Ok(first_entry)
}

/// All per-method AUCs of one repetition.
fn run_rep(config: &ExperimentConfig, rep: usize) -> Result<Vec<f64>> {
    let (problem, truth) = generate_instance(config, rep)?;
    let iss = iss_path(
        &problem,
        &IssOptions {
            t_max: f64::INFINITY,
            max_breakpoints: config.iss_max_breakpoints,
            boundary_tol: 1e-9,
        },
    )?;
    let auc_iss = roc_auc(&selection_order(&iss), &truth)?.auc;

    let last_breakpoint = *iss.breakpoints().last().unwrap();
    let horizon = (config.lb_horizon_factor * last_breakpoint)
        .min(config.lb_t_cap)
        .max(1.0);

    let gram = problem.gram_n();
    let xty_n = problem.gradient(&DVector::zeros(problem.p()));
    let mut aucs = Vec::with_capacity(config.kappa_list.len() + 2);
    for &kappa in &config.kappa_list {
        let alpha = config.kappa_alpha / kappa;
        let entries = lb_first_entries(
            &gram,
            &xty_n,
            kappa,
            alpha,
            horizon,
            config.lb_max_iters,
        )?;
        let order = order_from_keys(&entries);
        aucs.push(roc_auc(&order, &truth)?.auc);
    }
    aucs.push(auc_iss);

    let lmax = crate::lasso::lambda_max(&problem).max(f64::MIN_POSITIVE);
    let grid = GridSpec {
        lambda_max: lmax,
        lambda_min: lmax * 1e-3,
        count: config.lasso_grid_count,
        geometric: true,
    };
    let lasso = lasso_path(&problem, &grid)?;
    aucs.push(roc_auc(&selection_order(&lasso), &truth)?.auc);
    Ok(aucs)
}

/// Runs the full study: `reps` independent instances, each scored by ISS,
/// LB at every kappa (with kappa*alpha fixed), and the LASSO grid.
/// Repetitions run in parallel; aggregation order is fixed, so the output is
/// deterministic for a given config and seed.
pub fn run_auc_study(config: &ExperimentConfig) -> Result<AucStudy> {
    config.validate()?;
    let methods = method_list(config);
    let per_rep: Vec<(usize, Result<Vec<f64>>)> = (0..config.reps)
        .into_par_iter()
        .map(|rep| (rep, run_rep(config, rep)))
        .collect();

    let mut rows = Vec::new();
    let mut per_method: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
    let mut failures = 0usize;
    for (rep, outcome) in per_rep {
        match outcome {
            Ok(aucs) => {
                for (m, &auc) in aucs.iter().enumerate() {
                    rows.push(AucRow {
                        method: methods[m].0.clone(),
                        kappa: methods[m].1,
                        sigma: config.sigma,
                        rep,
                        auc,
                    });
                    per_method[m].push(auc);
                }
            }
            Err(_) => failures += 1,
        }
    }

    let cells = methods
        .iter()
        .zip(&per_method)
        .map(|((method, kappa), values)| {
            let reps = values.len();
            let mean = values.iter().sum::<f64>() / reps.max(1) as f64;
            let std = if reps > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / (reps - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            AucCell {
                method: method.clone(),
                kappa: *kappa,
                sigma: config.sigma,
                mean_auc: mean,
                std_auc: std,
                reps,
                failures,
            }
        })
        .collect();
    Ok(AucStudy { rows, cells })
}

/// Which path a sign-consistency trial follows.
#[derive(Debug, Clone, Copy)]
pub enum TrialMethod {
    Iss,
    Lb { kappa: f64 },
}

/// When the trial stops scanning the path.
#[derive(Debug, Clone, Copy)]
pub enum StopSpec {
    /// The theory-driven stopping time from the instance's condition report
    /// (infinite when sigma = 0).
    TauBar,
    /// A data-dependent rule.
    Rule(StopRule),
}

/// Outcome of one sign-consistency trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialOutcome {
    pub hit: bool,
    pub first_hit_t: Option<f64>,
    /// The stopping horizon used.
    pub stop_t: f64,
}

fn signs_match(beta: &DVector<f64>, beta_star: &DVector<f64>) -> bool {
    beta.len() == beta_star.len()
        && (0..beta.len()).all(|i| {
            let a = beta[i];
            let b = beta_star[i];
            (a == 0.0 && b == 0.0) || (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0)
        })
}

/// Generates the instance of `(config, rep)` and reports whether the chosen
/// path reaches `sign(beta_t) = sign(beta*)` before the stop, and when.
pub fn sign_consistency_trial(
    config: &ExperimentConfig,
    rep: usize,
    method: TrialMethod,
    stop: StopSpec,
) -> Result<TrialOutcome> {
    let (problem, truth) = generate_instance(config, rep)?;
    let stop_t = match stop {
        StopSpec::TauBar => {
            if truth.sigma() == 0.0 {
                f64::INFINITY
            } else {
                let report = check_conditions(&problem, truth.support())?;
                tau_bar(
                    report.eta,
                    truth.sigma(),
                    problem.n(),
                    problem.p(),
                    problem.max_colnorm_off_support(truth.support()),
                    None,
                    None,
                )?
            }
        }
        StopSpec::Rule(_) => f64::INFINITY,
    };

    match method {
        TrialMethod::Iss => {
            let path = iss_path(
                &problem,
                &IssOptions {
                    t_max: if stop_t.is_finite() { stop_t } else { 1e9 },
                    max_breakpoints: config.iss_max_breakpoints,
                    boundary_tol: 1e-9,
                },
            )?;
            for (k, beta) in path.beta_on_pieces().iter().enumerate() {
                let t = path.breakpoints()[k];
                if t > stop_t {
                    break;
                }
                if let StopSpec::Rule(rule) = stop {
                    let r = problem.residual(beta);
                    let fired = match rule {
                        StopRule::Residual { sigma } => {
                            crate::diagnostics::stop_rule_residual(&r, sigma, problem.n())
                        }
                        StopRule::Gradient { sigma, factor } => {
                            crate::diagnostics::stop_rule_gradient_with_factor(
                                &problem, &r, sigma, factor,
                            )
                        }
                    };
                    if signs_match(beta, truth.beta_star()) {
                        return Ok(TrialOutcome {
                            hit: true,
                            first_hit_t: Some(t),
                            stop_t: t,
                        });
                    }
                    if fired {
                        return Ok(TrialOutcome {
                            hit: false,
                            first_hit_t: None,
                            stop_t: t,
                        });
                    }
                } else if signs_match(beta, truth.beta_star()) {
                    return Ok(TrialOutcome {
                        hit: true,
                        first_hit_t: Some(t),
                        stop_t,
                    });
                }
            }
            Ok(TrialOutcome {
                hit: false,
                first_hit_t: None,
                stop_t,
            })
        }
        TrialMethod::Lb { kappa } => {
            let alpha = config.kappa_alpha / kappa;
            let horizon = if stop_t.is_finite() { stop_t } else { 1e6 * alpha };
            let trace = lb_run(
                &problem,
                kappa,
                alpha,
                &LbOptions {
                    max_iters: config.lb_max_iters,
                    t_max: horizon,
                    record_stride: 1,
                    stop_rule: match stop {
                        StopSpec::Rule(rule) => Some(rule),
                        StopSpec::TauBar => None,
                    },
                },
            )?;
            for rec in &trace.records {
                if rec.t > stop_t {
                    break;
                }
                if signs_match(&rec.beta, truth.beta_star()) {
                    return Ok(TrialOutcome {
                        hit: true,
                        first_hit_t: Some(rec.t),
                        stop_t,
                    });
                }
            }
            Ok(TrialOutcome {
                hit: false,
                first_hit_t: None,
                stop_t,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n: 10,
            p: 5,
            s: 2,
            sigma: 0.0,
            signal: SignalLaw::ShiftedGaussian,
            covariance: Covariance::Identity,
            kappa_list: vec![4.0],
            kappa_alpha: 0.1,
            reps: 3,
            seed: 7,
            stream_offset: 0,
            lasso_grid_count: 50,
            iss_max_breakpoints: 200,
            lb_max_iters: 100_000,
            lb_horizon_factor: 1.5,
            lb_t_cap: 30.0,
        }
    }

    #[test]
    fn noiseless_instances_reconstruct_exactly() {
        let config = tiny_config();
        let (problem, truth) = generate_instance(&config, 0).unwrap();
        let fit = problem.x() * truth.beta_star();
        assert!((problem.y() - fit).amax() < 1e-12);
        // Shifted Gaussian magnitudes are at least 1.
        for &j in truth.support() {
            assert!(truth.beta_star()[j].abs() >= 1.0);
        }
        assert_eq!(truth.support(), &[0, 1]);
    }

    #[test]
    fn identity_covariance_gram_approaches_identity() {
        let mut config = tiny_config();
        config.n = 10_000;
        config.p = 5;
        config.sigma = 1.0;
        let (problem, _) = generate_instance(&config, 1).unwrap();
        let gram = problem.gram_n();
        for i in 0..5 {
            for j in 0..5 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[(i, j)] - expected).abs() < 0.05,
                    "gram[{i},{j}] = {}",
                    gram[(i, j)]
                );
            }
        }
    }

    #[test]
    fn same_stream_reproduces_the_instance() {
        let config = tiny_config();
        let (p1, t1) = generate_instance(&config, 2).unwrap();
        let (p2, t2) = generate_instance(&config, 2).unwrap();
        assert_eq!(p1.x(), p2.x());
        assert_eq!(p1.y(), p2.y());
        assert_eq!(t1.beta_star(), t2.beta_star());
        // Different repetitions differ.
        let (p3, _) = generate_instance(&config, 3).unwrap();
        assert_ne!(p1.x(), p3.x());
    }

    #[test]
    fn selection_order_on_identity_design() {
        let problem = Problem::new(
            DMatrix::identity(2, 2),
            DVector::from_column_slice(&[3.0, 1.0]),
        )
        .unwrap();
        let path = iss_path(&problem, &IssOptions::default()).unwrap();
        let order = selection_order(&path);
        assert_eq!(order.len(), 2);
        assert_eq!(order[0].coordinate, 0);
        assert!((order[0].time - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(order[1].coordinate, 1);
        assert!((order[1].time - 2.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_path_has_empty_order() {
        let problem = Problem::new(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let path = iss_path(&problem, &IssOptions::default()).unwrap();
        assert!(selection_order(&path).is_empty());
    }

    #[test]
    fn lasso_and_iss_agree_on_orthogonal_designs() {
        // Orthogonal columns: both methods select in order of |X_j^T y|.
        let n = 4;
        let mut x = DMatrix::zeros(n, 4);
        for j in 0..4 {
            x[(j, j)] = 1.0;
        }
        let y = DVector::from_column_slice(&[3.0, -1.5, 0.7, 2.2]);
        let problem = Problem::new(x, y).unwrap();
        let iss = iss_path(&problem, &IssOptions::default()).unwrap();
        let lmax = crate::lasso::lambda_max(&problem);
        let lasso = lasso_path(
            &problem,
            &GridSpec {
                lambda_max: lmax,
                lambda_min: lmax * 1e-3,
                count: 400,
                geometric: true,
            },
        )
        .unwrap();
        let order_iss: Vec<usize> = selection_order(&iss).iter().map(|e| e.coordinate).collect();
        let order_lasso: Vec<usize> = selection_order(&lasso)
            .iter()
            .map(|e| e.coordinate)
            .collect();
        assert_eq!(order_iss, vec![0, 3, 1, 2]);
        assert_eq!(order_lasso, order_iss);
    }

    #[test]
    fn roc_extremes() {
        let mut beta = DVector::zeros(3);
        beta[0] = 1.0;
        let truth = GroundTruth::new(beta, 0.0).unwrap();
        let perfect = vec![
            SelectionEvent {
                coordinate: 0,
                time: 0.1,
            },
            SelectionEvent {
                coordinate: 1,
                time: 0.5,
            },
            SelectionEvent {
                coordinate: 2,
                time: 0.9,
            },
        ];
        let r = roc_auc(&perfect, &truth).unwrap();
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.fpr.first(), Some(&0.0));
        assert_eq!((r.fpr.last(), r.tpr.last()), (Some(&1.0), Some(&1.0)));

        let inverted = vec![
            SelectionEvent {
                coordinate: 1,
                time: 0.1,
            },
            SelectionEvent {
                coordinate: 2,
                time: 0.2,
            },
            SelectionEvent {
                coordinate: 0,
                time: 0.9,
            },
        ];
        assert_eq!(roc_auc(&inverted, &truth).unwrap().auc, 0.0);

        // Rank-statistic oracle: AUC equals the fraction of (signal, noise)
        // pairs ranked correctly.
        let order = vec![SelectionEvent {
            coordinate: 0,
            time: 0.3,
        }];
        let r = roc_auc(&order, &truth).unwrap();
        let rank_of = |j: usize| -> usize {
            // coordinate 0 selected first, then unselected 1, 2 by index.
            match j {
                0 => 0,
                other => other,
            }
        };
        let mut correct = 0;
        for t in [1usize, 2] {
            if rank_of(0) < rank_of(t) {
                correct += 1;
            }
        }
        assert_eq!(r.auc, correct as f64 / 2.0);

        let empty_truth = GroundTruth::new(DVector::zeros(3), 0.0).unwrap();
        assert!(roc_auc(&perfect, &empty_truth).is_err());
    }

    #[test]
    fn roc_invariant_under_noise_relabeling() {
        // Permuting which T coordinates carry which entry times does not
        // change the AUC as long as the rank pattern is preserved.
        let mut beta = DVector::zeros(5);
        beta[1] = 1.0;
        beta[3] = -2.0;
        let truth = GroundTruth::new(beta, 0.0).unwrap();
        let order_a = vec![
            SelectionEvent { coordinate: 1, time: 0.1 },
            SelectionEvent { coordinate: 0, time: 0.2 },
            SelectionEvent { coordinate: 3, time: 0.3 },
            SelectionEvent { coordinate: 4, time: 0.4 },
        ];
        let order_b = vec![
            SelectionEvent { coordinate: 1, time: 0.1 },
            SelectionEvent { coordinate: 4, time: 0.2 },
            SelectionEvent { coordinate: 3, time: 0.3 },
            SelectionEvent { coordinate: 2, time: 0.4 },
        ];
        let a = roc_auc(&order_a, &truth).unwrap().auc;
        let b = roc_auc(&order_b, &truth).unwrap().auc;
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_study_is_perfect_and_deterministic() {
        // n >> p keeps the design orthogonal enough that even the sluggish
        // kappa = 4 dynamics separates signal from noise perfectly at
        // sigma = 0.
        let mut config = tiny_config();
        config.n = 200;
        config.p = 10;
        config.s = 3;
        config.reps = 5;
        let study = run_auc_study(&config).unwrap();
        for cell in &study.cells {
            assert_eq!(cell.reps, 5);
            assert_eq!(cell.failures, 0);
            assert!(
                cell.mean_auc == 1.0,
                "{} auc = {}",
                cell.method,
                cell.mean_auc
            );
            assert_eq!(cell.std_auc, 0.0);
        }
        // Bit-for-bit reproducibility.
        let again = run_auc_study(&config).unwrap();
        for (a, b) in study.rows.iter().zip(&again.rows) {
            assert_eq!(a.auc.to_bits(), b.auc.to_bits());
        }
    }

    #[test]
    fn overwhelming_noise_defeats_sign_consistency() {
        // sigma far above beta*_min: the pattern is rarely reached before
        // tau_bar.
        let mut config = tiny_config();
        config.n = 30;
        config.p = 10;
        config.s = 3;
        config.sigma = 25.0;
        let mut hits = 0;
        let trials = 40;
        for rep in 0..trials {
            let outcome =
                sign_consistency_trial(&config, rep, TrialMethod::Iss, StopSpec::TauBar);
            if matches!(outcome, Ok(TrialOutcome { hit: true, .. })) {
                hits += 1;
            }
        }
        assert!(
            hits * 2 < trials,
            "hit rate {hits}/{trials} should be below one half"
        );
    }

    #[test]
    fn scalar_trial_hits_at_the_closed_form_time() {
        // 1-D noiseless: entry exactly at t = 1/y.
        let mut config = tiny_config();
        config.n = 1;
        config.p = 1;
        config.s = 1;
        config.sigma = 0.0;
        // p = 1 cannot feed tau_bar, but sigma = 0 short-circuits to infinity.
        let outcome =
            sign_consistency_trial(&config, 0, TrialMethod::Iss, StopSpec::TauBar).unwrap();
        assert!(outcome.hit);
        // Entry at t = n / |X^T y| = 1 / |x y| for the 1x1 design.
        let (problem, _) = generate_instance(&config, 0).unwrap();
        let expected = 1.0 / (problem.x()[(0, 0)] * problem.y()[0]).abs();
        assert!((outcome.first_hit_t.unwrap() - expected).abs() < 1e-10);
    }
}
