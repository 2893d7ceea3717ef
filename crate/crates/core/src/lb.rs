//! Linearized Bregman dynamics: the discrete two-line iteration
//! `z_{k+1} = z_k + (alpha/n) X^T (y - X beta_k)`, `beta_k = kappa shrink(z_k, 1)`,
//! and its continuous limit `dz/dt = (1/n) X^T (y - kappa X shrink(z, 1))`
//! integrated adaptively with sign-pattern event localization.

use nalgebra::DVector;

use crate::diagnostics::{stop_rule_gradient_with_factor, stop_rule_residual};
use crate::error::{Error, Result};
use crate::model::{shrink, Problem};

/// Iterates growing beyond this magnitude are declared divergent.
pub(crate) const DIVERGENCE_LIMIT: f64 = 1e80;

/// Data-dependent early-stopping rules checked during a run.
#[derive(Debug, Clone, Copy)]
pub enum StopRule {
    /// `|y - X beta|_2 <= sigma sqrt(n + 2 sqrt(n log n))`.
    Residual { sigma: f64 },
    /// `|X^T (y - X beta)|_inf <= factor * 2 sigma sqrt(max_i |X_i| log p)`.
    Gradient { sigma: f64, factor: f64 },
}

/// Why an LB run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StoppingReason {
    MaxIters,
    TMax,
    RuleResidual,
    RuleGradient,
}

/// Options for [`lb_run`].
#[derive(Debug, Clone)]
pub struct LbOptions {
    pub max_iters: usize,
    pub t_max: f64,
    /// Keep every `record_stride`-th iterate (the final one is always kept).
    pub record_stride: usize,
    pub stop_rule: Option<StopRule>,
}

impl Default for LbOptions {
    fn default() -> Self {
        Self {
            max_iters: 1_000_000,
            t_max: f64::INFINITY,
            record_stride: 1,
            stop_rule: None,
        }
    }
}

/// One recorded iterate.
#[derive(Debug, Clone)]
pub struct LbRecord {
    pub k: usize,
    /// `t_k = k * alpha` exactly.
    pub t: f64,
    pub z: DVector<f64>,
    pub beta: DVector<f64>,
}

/// Recorded trajectory of a discrete LB run.
#[derive(Debug, Clone)]
pub struct LbTrace {
    pub kappa: f64,
    pub alpha: f64,
    pub records: Vec<LbRecord>,
    pub stopping_reason: StoppingReason,
    /// Set when `kappa * alpha * lambda_max(X^T X / n) >= 2`; the run
    /// continues (the theorem's condition is on the support submatrix) but
    /// divergence becomes likely.
    pub step_bound_violated: bool,
    /// First iteration (and time) at which each coordinate became nonzero.
    pub first_entry: Vec<Option<(usize, f64)>>,
}

impl LbTrace {
    pub fn first_entry_times(&self) -> Vec<Option<f64>> {
        self.first_entry.iter().map(|e| e.map(|(_, t)| t)).collect()
    }

    /// Final recorded iterate.
    pub fn last(&self) -> &LbRecord {
        self.records.last().expect("trace has at least one record")
    }
}

/// One step of the two-line iteration starting from `z`.
pub fn lb_step(
    z: &DVector<f64>,
    problem: &Problem,
    kappa: f64,
    alpha: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(kappa > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lb_step needs kappa > 0 and alpha > 0, got kappa = {kappa}, alpha = {alpha}"
        )));
    }
    let beta = shrink(z, 1.0)? * kappa;
    let z_next = z + problem.gradient(&beta) * alpha;
    let beta_next = shrink(&z_next, 1.0)? * kappa;
    Ok((z_next, beta_next))
}

/// Runs the iteration from `z_0 = 0`, recording per stride, stopping on the
/// first satisfied criterion. Divergent iterates (non-finite or beyond 1e80)
/// raise [`Error::Divergence`] naming the step-size bound.
pub fn lb_run(problem: &Problem, kappa: f64, alpha: f64, options: &LbOptions) -> Result<LbTrace> {
    if !(kappa > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lb_run needs kappa > 0 and alpha > 0, got kappa = {kappa}, alpha = {alpha}"
        )));
    }
    let p = problem.p();
    let n = problem.n() as f64;
    let stride = options.record_stride.max(1);

    let opnorm = problem.gram_n().symmetric_eigen().eigenvalues.max();
    let step_bound_violated = kappa * alpha * opnorm >= 2.0;

    let mut z = DVector::<f64>::zeros(p);
    let mut beta = DVector::<f64>::zeros(p);
    let mut residual = DVector::<f64>::zeros(problem.n());
    let mut g = DVector::<f64>::zeros(p);
    let mut records = Vec::new();
    let mut first_entry: Vec<Option<(usize, f64)>> = vec![None; p];
    let reason;
    let scale = alpha / n;

    let mut k = 0usize;
    loop {
        let t = k as f64 * alpha;
        if k % stride == 0 {
            records.push(LbRecord {
                k,
                t,
                z: z.clone(),
                beta: beta.clone(),
            });
        }
        if let Some(rule) = &options.stop_rule {
            let r = problem.residual(&beta);
            let fired = match rule {
                StopRule::Residual { sigma } => stop_rule_residual(&r, *sigma, problem.n()),
                StopRule::Gradient { sigma, factor } => {
                    stop_rule_gradient_with_factor(problem, &r, *sigma, *factor)
                }
            };
            if fired {
                reason = match rule {
                    StopRule::Residual { .. } => StoppingReason::RuleResidual,
                    StopRule::Gradient { .. } => StoppingReason::RuleGradient,
                };
                break;
            }
        }
        if k >= options.max_iters {
            reason = StoppingReason::MaxIters;
            break;
        }
        if (k + 1) as f64 * alpha > options.t_max {
            reason = StoppingReason::TMax;
            break;
        }

        // z <- z + (alpha/n) X^T (y - X beta), beta <- kappa shrink(z, 1).
        problem.x().mul_to(&beta, &mut residual);
        residual.neg_mut();
        residual += problem.y();
        problem.x().tr_mul_to(&residual, &mut g);
        z.axpy(scale, &g, 1.0);
        k += 1;
        let t_next = k as f64 * alpha;
        let mut worst = 0.0_f64;
        for i in 0..p {
            let b = kappa * crate::model::shrink_scalar(z[i], 1.0);
            beta[i] = b;
            let a = z[i].abs();
            if a > worst {
                worst = a;
            }
            if b != 0.0 && first_entry[i].is_none() {
                first_entry[i] = Some((k, t_next));
            }
        }
        if !worst.is_finite() || worst > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                iter: k,
                observed: kappa * alpha * opnorm,
            });
        }
    }

    // Always keep the final iterate.
    if records.last().map(|r| r.k) != Some(k) {
        records.push(LbRecord {
            k,
            t: k as f64 * alpha,
            z,
            beta,
        });
    }
    Ok(LbTrace {
        kappa,
        alpha,
        records,
        stopping_reason: reason,
        step_bound_violated,
        first_entry,
    })
}

/// Options for [`lbiss_integrate`].
#[derive(Debug, Clone)]
pub struct LbissOptions {
    pub t_max: f64,
    /// Requested sample times (clamped to `[0, t_max]`, sorted internally).
    pub sample_times: Vec<f64>,
    /// Bisection tolerance (in t) for locating sign-pattern changes.
    pub event_tol: f64,
    /// Local error target of the adaptive integrator.
    pub local_tol: f64,
}

impl Default for LbissOptions {
    fn default() -> Self {
        Self {
            t_max: 1.0,
            sample_times: Vec::new(),
            event_tol: 1e-10,
            local_tol: 1e-10,
        }
    }
}

/// Samples of the continuous Linearized Bregman ISS path.
#[derive(Debug, Clone)]
pub struct LbissSamples {
    pub kappa: f64,
    pub times: Vec<f64>,
    pub rho: Vec<DVector<f64>>,
    pub beta: Vec<DVector<f64>>,
    /// Times at which some `|z_i|` crossed the threshold 1.
    pub events: Vec<f64>,
    /// Set when more than `100 p` events accumulated and integration stopped.
    pub truncated: bool,
}

/// Shrink sign pattern of z: -1, 0, +1 per coordinate by position relative to
/// the thresholds -1 and +1.
fn pattern(z: &DVector<f64>) -> Vec<i8> {
    z.iter()
        .map(|&v| {
            if v >= 1.0 {
                1
            } else if v <= -1.0 {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Integrates `dz/dt = (1/n) X^T (y - kappa X shrink(z, 1))` from `z(0) = 0`
/// with a classical 4-stage explicit method, halving the step until the
/// step-doubling error estimate meets `local_tol`, and locating every
/// threshold crossing of `|z_i| = 1` by bisection to `event_tol`.
pub fn lbiss_integrate(
    problem: &Problem,
    kappa: f64,
    options: &LbissOptions,
) -> Result<LbissSamples> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lbiss needs kappa > 0, got {kappa}"
        )));
    }
    if !(options.t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lbiss needs t_max > 0, got {}",
            options.t_max
        )));
    }
    let p = problem.p();
    let n = problem.n() as f64;
    let field = |z: &DVector<f64>| -> DVector<f64> {
        let beta = z.map(|v| kappa * crate::model::shrink_scalar(v, 1.0));
        let r = problem.y() - problem.x() * beta;
        problem.x().tr_mul(&r) / n
    };
    let rk4 = |z: &DVector<f64>, h: f64| -> DVector<f64> {
        let k1 = field(z);
        let k2 = field(&(z + &k1 * (h / 2.0)));
        let k3 = field(&(z + &k2 * (h / 2.0)));
        let k4 = field(&(z + &k3 * h));
        z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    };

    let mut sample_times: Vec<f64> = options
        .sample_times
        .iter()
        .copied()
        .filter(|&t| (0.0..=options.t_max).contains(&t))
        .collect();
    sample_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sample_times.dedup();

    let mut out = LbissSamples {
        kappa,
        times: Vec::new(),
        rho: Vec::new(),
        beta: Vec::new(),
        events: Vec::new(),
        truncated: false,
    };
    let record = |out: &mut LbissSamples, t: f64, z: &DVector<f64>| {
        let beta = z.map(|v| kappa * crate::model::shrink_scalar(v, 1.0));
        let rho = z - &beta / kappa;
        out.times.push(t);
        out.rho.push(rho);
        out.beta.push(beta);
    };

    let mut t = 0.0_f64;
    let mut z = DVector::<f64>::zeros(p);
    let mut next_sample = 0usize;
    while next_sample < sample_times.len() && sample_times[next_sample] <= t {
        record(&mut out, sample_times[next_sample], &z);
        next_sample += 1;
    }

    let max_events = 100 * p;
    let mut h = options.t_max / 64.0;
    let h_min = options.t_max * 1e-15;
    while t < options.t_max {
        let mut target = options.t_max;
        if next_sample < sample_times.len() {
            target = target.min(sample_times[next_sample]);
        }
        if target <= t {
            // Sample exactly at the current state.
            record(&mut out, target, &z);
            next_sample += 1;
            continue;
        }
        h = h.min(target - t);
        let full = rk4(&z, h);
        let half = rk4(&rk4(&z, h / 2.0), h / 2.0);
        let err = (&full - &half).amax() / 15.0;
        if err > options.local_tol && h > h_min {
            h /= 2.0;
            continue;
        }
        // Fifth-order correction of the two-half-step result.
        let z_new = &half + (&half - &full) / 15.0;

        let before = pattern(&z);
        let after = pattern(&z_new);
        if before != after {
            // Locate the earliest crossing in (t, t + h] by bisection.
            let mut lo = 0.0_f64;
            let mut hi = h;
            while hi - lo > options.event_tol {
                let mid = 0.5 * (lo + hi);
                let z_mid = rk4(&z, mid);
                if pattern(&z_mid) != before {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let z_event = rk4(&z, hi);
            t += hi;
            z = z_event;
            out.events.push(t);
            if out.events.len() > max_events {
                out.truncated = true;
                break;
            }
            continue;
        }

        t += h;
        z = z_new;
        if err < options.local_tol / 32.0 {
            h *= 2.0;
        }
        while next_sample < sample_times.len() && sample_times[next_sample] <= t {
            record(&mut out, sample_times[next_sample], &z);
            next_sample += 1;
        }
    }
    // Any samples exactly at t_max that were not flushed.
    while next_sample < sample_times.len() {
        record(&mut out, sample_times[next_sample], &z);
        next_sample += 1;
    }
    Ok(out)
}
