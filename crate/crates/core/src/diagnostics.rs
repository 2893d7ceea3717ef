//! Theory-side instruments: Bregman distance, the potential Psi, the Bihari
//! comparison function F and its inverse, stopping-time bounds, the residual
//! decomposition, the two data-dependent stopping rules, and the discrete
//! Bihari verification of oracle-dynamics traces.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::lb::LbTrace;
use crate::model::{membership, ConditionReport, GroundTruth, Problem};

/// Potential and residual-split values sampled along a trajectory.
#[derive(Debug, Clone)]
pub struct PotentialTrace {
    /// Times (or iteration indices cast to f64).
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    pub bregman: Vec<f64>,
    /// `|X_S (beta - beta_tilde)|` per sample.
    pub signal_distance: Vec<f64>,
    /// `(signal_norm, noise_norm)` of the residual split per sample.
    pub residual_split: Vec<(f64, f64)>,
}

fn validate_subgradient(beta: &DVector<f64>, rho: &DVector<f64>) -> Result<()> {
    if beta.len() != rho.len() {
        return Err(Error::InvalidInput(
            "subgradient length mismatch".to_string(),
        ));
    }
    for i in 0..beta.len() {
        if rho[i].abs() > 1.0 + 1e-9 {
            return Err(Error::SubgradientValidation {
                index: i,
                reason: format!("|rho_i| = {} exceeds 1", rho[i].abs()),
            });
        }
        if (rho[i] * beta[i] - beta[i].abs()).abs() > 1e-9 {
            return Err(Error::SubgradientValidation {
                index: i,
                reason: format!(
                    "rho_i beta_i = {} does not match |beta_i| = {}",
                    rho[i] * beta[i],
                    beta[i].abs()
                ),
            });
        }
    }
    Ok(())
}

/// Bregman distance of the l1 norm, `D(beta_ref, beta) = <beta_ref, rho_ref - rho>`.
/// Both `(beta, rho)` pairs must satisfy the subgradient inclusion.
pub fn bregman_distance(
    beta_ref: &DVector<f64>,
    rho_ref: &DVector<f64>,
    beta: &DVector<f64>,
    rho: &DVector<f64>,
) -> Result<f64> {
    validate_subgradient(beta_ref, rho_ref)?;
    validate_subgradient(beta, rho)?;
    Ok(beta_ref.dot(rho_ref) - beta_ref.dot(rho))
}

/// Potential `Psi = D(beta_ref, beta) + |beta - beta_ref|^2 / (2 kappa)`;
/// `kappa = inf` drops the quadratic term.
pub fn potential(
    beta_ref: &DVector<f64>,
    rho_ref: &DVector<f64>,
    beta: &DVector<f64>,
    rho: &DVector<f64>,
    kappa: f64,
) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!(
            "potential needs kappa > 0, got {kappa}"
        )));
    }
    let d = bregman_distance(beta_ref, rho_ref, beta, rho)?;
    if kappa.is_finite() {
        Ok(d + (beta - beta_ref).norm_squared() / (2.0 * kappa))
    } else {
        Ok(d)
    }
}

/// The three-branch comparison function
/// `F(x) = x/(2 kappa) + { 0 | 2x/bmin | 2 sqrt(x s) }` with knots at
/// `bmin^2` and `s bmin^2`. Strictly increasing for x > 0.
pub fn bihari_f(x: f64, kappa: f64, beta_min_tilde: f64, s: usize) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::InvalidInput(format!("F needs x >= 0, got {x}")));
    }
    if !(beta_min_tilde > 0.0) || s == 0 {
        return Err(Error::InvalidInput(
            "F needs beta_min_tilde > 0 and s >= 1".into(),
        ));
    }
    let quad = if kappa.is_finite() {
        x / (2.0 * kappa)
    } else {
        0.0
    };
    let b2 = beta_min_tilde * beta_min_tilde;
    let tail = if x < b2 {
        0.0
    } else if x <= s as f64 * b2 {
        2.0 * x / beta_min_tilde
    } else {
        2.0 * (x * s as f64).sqrt()
    };
    Ok(quad + tail)
}

/// Right-continuous inverse `F^{-1}(y) = inf { x : F(x) >= y }` by monotone
/// bisection to 1e-12, doubling the upper bracket as needed.
pub fn bihari_f_inv(y: f64, kappa: f64, beta_min_tilde: f64, s: usize) -> Result<f64> {
    if y < 0.0 || y.is_nan() {
        return Err(Error::InvalidInput(format!("F^-1 needs y >= 0, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let mut hi = beta_min_tilde * beta_min_tilde;
    let mut guard = 0;
    while bihari_f(hi, kappa, beta_min_tilde, s)? < y {
        hi *= 2.0;
        guard += 1;
        if guard > 2048 {
            return Err(Error::InvalidInput(
                "F^-1 bracket failed to close".to_string(),
            ));
        }
    }
    let mut lo = 0.0_f64;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if bihari_f(mid, kappa, beta_min_tilde, s)? >= y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Upper bounds on the oracle-dynamics stopping times for sign consistency
/// (`tau_1`) and l2 accuracy `C sqrt(s log p / n)` (`tau_2`).
///
/// Continuous form with `alpha = None`; supplying `alpha` and `opnorm_s`
/// switches to the discrete form with `gamma_tilde = gamma (1 - kappa alpha
/// opnorm_s / 2)` and the `+3 alpha` / `+2 alpha` corrections.
#[allow(clippy::too_many_arguments)]
pub fn stopping_time_bounds(
    beta_tilde: &DVector<f64>,
    kappa: f64,
    gamma: f64,
    c: f64,
    n: usize,
    p: usize,
    alpha: Option<f64>,
    opnorm_s: Option<f64>,
) -> Result<(f64, f64)> {
    if !(gamma > 0.0) || !(kappa > 0.0) {
        return Err(Error::InvalidInput(
            "stopping bounds need gamma > 0 and kappa > 0".into(),
        ));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidInput("stopping bounds need C > 0".into()));
    }
    let nonzero: Vec<f64> = beta_tilde
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .collect();
    if nonzero.is_empty() {
        return Err(Error::EmptySupport("stopping time bounds"));
    }
    let s = nonzero.len() as f64;
    let bmin = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
    let norm2 = beta_tilde.norm();

    let (gamma_eff, add1, add2) = match (alpha, opnorm_s) {
        (Some(alpha), Some(opnorm)) => {
            let gamma_tilde = gamma * (1.0 - kappa * alpha * opnorm / 2.0);
            if gamma_tilde <= 0.0 {
                return Err(Error::StepCondition {
                    gamma_tilde,
                });
            }
            (gamma_tilde, 3.0 * alpha, 2.0 * alpha)
        }
        (None, None) => (gamma, 0.0, 0.0),
        _ => {
            return Err(Error::InvalidInput(
                "discrete stopping bounds need both alpha and opnorm_s".into(),
            ))
        }
    };

    let kappa_term = |v: f64| if kappa.is_finite() { v / kappa } else { 0.0 };
    let tau1 =
        (4.0 + 2.0 * s.ln()) / (gamma_eff * bmin) + kappa_term((norm2 / bmin).ln() / gamma_eff) + add1;
    let tau2 = 4.0 / (c * gamma_eff) * (n as f64 / (p as f64).ln()).sqrt()
        + kappa_term(
            (1.0 + (n as f64 * norm2 * norm2 / (c * c * s * (p as f64).ln())).ln())
                / (2.0 * gamma_eff),
        )
        + add2;
    Ok((tau1, tau2))
}

/// Orthogonal residual split `|r|^2 = |X_S (beta_tilde_S - beta_S)|^2 + |P_T eps|^2`.
///
/// Returns `(signal_norm, noise_norm, total)`. When the realized noise is not
/// supplied, the noise part uses `(I - P_S) y`, which equals `(I - P_S) eps`
/// whenever `y = X_S beta*_S + eps`.
pub fn residual_decomposition(
    problem: &Problem,
    support: &[usize],
    beta: &DVector<f64>,
    epsilon_known: Option<&DVector<f64>>,
) -> Result<(f64, f64, f64)> {
    if support.is_empty() {
        return Err(Error::EmptySupport("residual decomposition"));
    }
    let beta_tilde = crate::model::oracle_estimator(problem, support)?;
    let x_s = problem.x().select_columns(support.iter());
    let diff = DVector::from_fn(support.len(), |k, _| {
        beta_tilde[support[k]] - beta[support[k]]
    });
    let signal_norm = (&x_s * diff).norm();

    // (I - P_S) v via the least-squares fit on X_S.
    let project_out = |v: &DVector<f64>| -> f64 {
        let svd = x_s.clone().svd(true, true);
        let coef = svd.solve(v, 1e-14).expect("svd solve");
        (v - &x_s * coef).norm()
    };
    let noise_norm = match epsilon_known {
        Some(eps) => project_out(eps),
        None => project_out(problem.y()),
    };
    let total = problem.residual(beta).norm();
    Ok((signal_norm, noise_norm, total))
}

/// Residual-norm stopping rule `|r|_2 <= sigma sqrt(n + 2 sqrt(n log n))`.
pub fn stop_rule_residual(residual: &DVector<f64>, sigma: f64, n: usize) -> bool {
    residual.norm() <= residual_rule_threshold(sigma, n)
}

/// Threshold of the residual rule.
pub fn residual_rule_threshold(sigma: f64, n: usize) -> f64 {
    let nf = n as f64;
    sigma * (nf + 2.0 * (nf * nf.ln()).sqrt()).sqrt()
}

/// Gradient-norm stopping rule `|X^T r|_inf <= 2 sigma sqrt(max_i |X_i| log p)`,
/// verbatim threshold (the column norm enters unsquared).
pub fn stop_rule_gradient(problem: &Problem, residual: &DVector<f64>, sigma: f64) -> bool {
    stop_rule_gradient_with_factor(problem, residual, sigma, 1.0)
}

/// Gradient rule with a multiplicative threshold override for the
/// unit-sensitive column-norm convention.
pub fn stop_rule_gradient_with_factor(
    problem: &Problem,
    residual: &DVector<f64>,
    sigma: f64,
    factor: f64,
) -> bool {
    let lhs = problem.x().tr_mul(residual).amax();
    lhs <= factor * gradient_rule_threshold(problem, sigma)
}

/// Threshold of the gradient rule.
pub fn gradient_rule_threshold(problem: &Problem, sigma: f64) -> f64 {
    let sqrt_n = (problem.n() as f64).sqrt();
    let max_colnorm = problem.column_norms_n().max() * sqrt_n;
    2.0 * sigma * (max_colnorm * (problem.p() as f64).ln()).sqrt()
}

/// The strong-signal condition
/// `beta*_min >= max(4 sigma / sqrt(gamma), 8 sigma (2 + log s) max_colnorm_T / (gamma eta)) sqrt(log p / n)`.
pub fn strong_signal_check(
    report: &ConditionReport,
    truth: &GroundTruth,
    n: usize,
    p: usize,
    max_colnorm_t: f64,
) -> bool {
    let Some(beta_min) = truth.beta_min() else {
        return false;
    };
    let sigma = truth.sigma();
    let s = report.s as f64;
    let a = 4.0 * sigma / report.gamma.sqrt();
    let b = 8.0 * sigma * (2.0 + s.ln()) * max_colnorm_t / (report.gamma * report.eta);
    beta_min >= a.max(b) * ((p as f64).ln() / n as f64).sqrt()
}

/// Checks the discrete Bihari inequality
/// `Psi_{k+1} - Psi_k <= -alpha gamma_tilde F^{-1}(Psi_k) + 1e-9`
/// along a full-stride oracle-dynamics trace. Returns whether it holds at
/// every adjacent pair and the worst (smallest) slack.
pub fn verify_discrete_bihari(
    trace: &LbTrace,
    beta_tilde: &DVector<f64>,
    gamma: f64,
    kappa: f64,
    alpha: f64,
    opnorm_s: f64,
) -> Result<(bool, f64)> {
    let gamma_tilde = gamma * (1.0 - kappa * alpha * opnorm_s / 2.0);
    if gamma_tilde <= 0.0 {
        return Err(Error::StepCondition { gamma_tilde });
    }
    let nonzero: Vec<f64> = beta_tilde
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .collect();
    if nonzero.is_empty() {
        return Err(Error::EmptySupport("discrete Bihari check"));
    }
    let bmin = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
    let s = nonzero.len();
    let rho_tilde = beta_tilde.map(f64::signum);

    let psi_of = |rec: &crate::lb::LbRecord| -> Result<f64> {
        let rho = &rec.z - &rec.beta / kappa;
        potential(beta_tilde, &rho_tilde, &rec.beta, &rho, kappa)
    };

    let mut holds = true;
    let mut worst_slack = f64::INFINITY;
    for w in trace.records.windows(2) {
        if w[1].k != w[0].k + 1 {
            return Err(Error::StrideTooCoarse {
                from: w[0].k,
                to: w[1].k,
            });
        }
        let psi_k = psi_of(&w[0])?;
        let psi_next = psi_of(&w[1])?;
        let decay = alpha * gamma_tilde * bihari_f_inv(psi_k, kappa, bmin, s)?;
        let slack = -decay - (psi_next - psi_k);
        worst_slack = worst_slack.min(slack);
        if slack < -1e-9 {
            holds = false;
        }
    }
    Ok((holds, worst_slack))
}

/// Potential, Bregman distance, signal distance, and residual split along a
/// recorded LB trace of the oracle dynamics (`problem` restricted to the
/// support columns, `beta_tilde` in the restricted coordinates).
pub fn potential_trace(
    trace: &LbTrace,
    problem_s: &Problem,
    beta_tilde: &DVector<f64>,
    kappa: f64,
    epsilon: Option<&DVector<f64>>,
) -> Result<PotentialTrace> {
    let rho_tilde = beta_tilde.map(f64::signum);
    // The noise part |(I - P_S) eps| is constant along the trace; project once
    // through an orthonormal basis of the column space.
    let q = problem_s.x().clone().qr().q();
    let project_out_norm = |v: &DVector<f64>| (v - &q * q.tr_mul(v)).norm();
    let noise = match epsilon {
        Some(eps) => project_out_norm(eps),
        None => project_out_norm(problem_s.y()),
    };
    let mut out = PotentialTrace {
        times: Vec::with_capacity(trace.records.len()),
        psi: Vec::with_capacity(trace.records.len()),
        bregman: Vec::with_capacity(trace.records.len()),
        signal_distance: Vec::with_capacity(trace.records.len()),
        residual_split: Vec::with_capacity(trace.records.len()),
    };
    for rec in &trace.records {
        let rho = &rec.z - &rec.beta / kappa;
        let d = bregman_distance(beta_tilde, &rho_tilde, &rec.beta, &rho)?;
        let psi = potential(beta_tilde, &rho_tilde, &rec.beta, &rho, kappa)?;
        let signal = (problem_s.x() * (beta_tilde - &rec.beta)).norm();
        out.times.push(rec.t);
        out.psi.push(psi);
        out.bregman.push(d);
        out.signal_distance.push(signal);
        out.residual_split.push((signal, noise));
    }
    Ok(out)
}

/// Quick membership check reused by the CLI for complement construction.
pub fn complement_of(p: usize, support: &[usize]) -> Vec<usize> {
    let in_s = membership(p, support);
    (0..p).filter(|&i| !in_s[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn bregman_distance_basics() {
        let b1 = DVector::from_column_slice(&[1.0, 0.0]);
        let r1 = DVector::from_column_slice(&[1.0, 0.0]);
        assert_eq!(bregman_distance(&b1, &r1, &b1, &r1).unwrap(), 0.0);

        // Matching sign pattern: distance zero.
        let b2 = DVector::from_column_slice(&[0.5, 0.0]);
        let r2 = DVector::from_column_slice(&[1.0, 0.3]);
        assert_eq!(bregman_distance(&b1, &r1, &b2, &r2).unwrap(), 0.0);

        // Reference (1, 0) against the origin: distance 1.
        let b0 = DVector::from_column_slice(&[0.0, 0.0]);
        let r0 = DVector::from_column_slice(&[0.0, 0.0]);
        assert_eq!(bregman_distance(&b1, &r1, &b0, &r0).unwrap(), 1.0);

        // Validation failures.
        let bad_rho = DVector::from_column_slice(&[1.5, 0.0]);
        assert!(bregman_distance(&b1, &bad_rho, &b0, &r0).is_err());
        let mismatched = DVector::from_column_slice(&[-1.0, 0.0]);
        assert!(bregman_distance(&b1, &mismatched, &b0, &r0).is_err());
    }

    #[test]
    fn potential_at_origin() {
        // Psi(0) = |b|_1 + |b|^2 / (2 kappa).
        let b = DVector::from_column_slice(&[2.0, -1.0, 0.0]);
        let rho = DVector::from_column_slice(&[1.0, -1.0, 0.2]);
        let zero = DVector::zeros(3);
        let rho0 = DVector::zeros(3);
        let kappa = 10.0;
        let psi = potential(&b, &rho, &zero, &rho0, kappa).unwrap();
        assert!((psi - (3.0 + 5.0 / (2.0 * kappa))).abs() < 1e-14);
        assert_eq!(potential(&b, &rho, &b, &rho, kappa).unwrap(), 0.0);

        // Double entry: D + quadratic recomputed independently.
        let beta = DVector::from_column_slice(&[0.5, 0.0, 0.1]);
        let rhob = DVector::from_column_slice(&[1.0, 0.4, 1.0]);
        let d = bregman_distance(&b, &rho, &beta, &rhob).unwrap();
        let psi = potential(&b, &rho, &beta, &rhob, kappa).unwrap();
        let quad = (&beta - &b).norm_squared() / (2.0 * kappa);
        assert!((psi - (d + quad)).abs() < 1e-14);
        // kappa = infinity drops the quadratic.
        let psi_inf = potential(&b, &rho, &beta, &rhob, f64::INFINITY).unwrap();
        assert_eq!(psi_inf, d);
    }

    #[test]
    fn bihari_f_branches_and_inverse() {
        let kappa = 5.0;
        let bmin = 0.5;
        let s = 4;
        assert_eq!(bihari_f(0.0, kappa, bmin, s).unwrap(), 0.0);
        // At the outer knot both branch expressions agree.
        let knot = s as f64 * bmin * bmin;
        let middle = 2.0 * knot / bmin;
        let outer = 2.0 * (knot * s as f64).sqrt();
        assert!((middle - outer).abs() < 1e-12);
        let f_knot = bihari_f(knot, kappa, bmin, s).unwrap();
        assert!((f_knot - (knot / (2.0 * kappa) + 2.0 * bmin * s as f64)).abs() < 1e-12);
        // The inner knot jumps by 2 bmin (right continuous).
        let eps = 1e-12;
        let left = bihari_f(bmin * bmin - eps, kappa, bmin, s).unwrap();
        let right = bihari_f(bmin * bmin, kappa, bmin, s).unwrap();
        assert!((right - left - 2.0 * bmin).abs() < 1e-9);

        // Strictly increasing on a grid.
        let mut last = -1.0;
        for i in 0..200 {
            let x = 1e-3 * 1.1_f64.powi(i);
            let f = bihari_f(x, kappa, bmin, s).unwrap();
            assert!(f > last);
            last = f;
        }

        // Inverse round trip on a log grid.
        for i in 0..60 {
            let x = 1e-4 * 1.5_f64.powi(i);
            let f = bihari_f(x, kappa, bmin, s).unwrap();
            let x_back = bihari_f_inv(f, kappa, bmin, s).unwrap();
            assert!(
                (x_back - x).abs() <= 1e-10 * x.max(1.0),
                "x = {x}, back = {x_back}"
            );
        }
    }

    #[test]
    fn stopping_bounds_limits() {
        let beta_tilde = DVector::from_column_slice(&[1.0, 1.0]);
        // Discrete form reproduces the continuous one as alpha -> 0.
        let (c1, c2) =
            stopping_time_bounds(&beta_tilde, 10.0, 1.0, 1.0, 100, 100, None, None).unwrap();
        let (d1, d2) = stopping_time_bounds(
            &beta_tilde,
            10.0,
            1.0,
            1.0,
            100,
            100,
            Some(1e-12),
            Some(1.0),
        )
        .unwrap();
        assert!((c1 - d1).abs() < 1e-9);
        assert!((c2 - d2).abs() < 1e-9);

        // kappa -> infinity: tau1 -> (4 + 2 log s) / (gamma bmin).
        let (t1, _) = stopping_time_bounds(
            &beta_tilde,
            f64::INFINITY,
            0.5,
            1.0,
            100,
            100,
            None,
            None,
        )
        .unwrap();
        assert!((t1 - (4.0 + 2.0 * 2.0_f64.ln()) / 0.5).abs() < 1e-12);

        // Double entry of the displayed formulas.
        let kappa = 10.0;
        let gamma = 1.0;
        let c = 1.0;
        let (t1, t2) =
            stopping_time_bounds(&beta_tilde, kappa, gamma, c, 100, 100, None, None).unwrap();
        let s = 2.0_f64;
        let bmin = 1.0;
        let norm = 2.0_f64.sqrt();
        let t1_hand = (4.0 + 2.0 * s.ln()) / (gamma * bmin) + (norm / bmin).ln() / (kappa * gamma);
        let t2_hand = 4.0 / (c * gamma) * (100.0 / 100.0_f64.ln()).sqrt()
            + (1.0 + (100.0 * norm * norm / (c * c * s * 100.0_f64.ln())).ln())
                / (2.0 * kappa * gamma);
        assert!((t1 - t1_hand).abs() < 1e-12);
        assert!((t2 - t2_hand).abs() < 1e-12);

        // Violated step condition.
        match stopping_time_bounds(&beta_tilde, 10.0, 1.0, 1.0, 100, 100, Some(1.0), Some(1.0)) {
            Err(Error::StepCondition { .. }) => {}
            other => panic!("expected step condition error, got {other:?}"),
        }
    }

    #[test]
    fn residual_split_is_pythagorean() {
        let x = crate::testutil::gaussian_matrix(12, 5, 51);
        let mut beta_star = DVector::zeros(5);
        beta_star[0] = 2.0;
        beta_star[2] = -1.0;
        let eps = crate::testutil::gaussian_vector(12, 52) * 0.2;
        let y = &x * &beta_star + &eps;
        let problem = Problem::new(x, y).unwrap();
        let support = vec![0, 2];

        // beta = beta_tilde: signal part vanishes, total = |P_T eps|.
        let beta_tilde = crate::model::oracle_estimator(&problem, &support).unwrap();
        let (sig, noise, total) =
            residual_decomposition(&problem, &support, &beta_tilde, Some(&eps)).unwrap();
        assert!(sig < 1e-10);
        assert!((total - noise).abs() < 1e-10);

        // Pythagorean identity at an arbitrary support-contained beta.
        let mut beta = DVector::zeros(5);
        beta[0] = 1.0;
        beta[2] = -0.4;
        let (sig, noise, total) =
            residual_decomposition(&problem, &support, &beta, Some(&eps)).unwrap();
        let lhs = total * total;
        let rhs = sig * sig + noise * noise;
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.max(1.0));

        // Without the realized noise the projection of y gives the same split.
        let (sig2, noise2, total2) =
            residual_decomposition(&problem, &support, &beta, None).unwrap();
        assert!((sig - sig2).abs() < 1e-12);
        assert!((noise - noise2).abs() < 1e-10);
        assert!((total - total2).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_zero_beta_total_is_signal() {
        let x = DMatrix::from_fn(9, 4, |i, j| ((i * 4 + j + 2) as f64 * 0.61).sin());
        let mut beta_star = DVector::zeros(4);
        beta_star[1] = 1.5;
        let y = &x * &beta_star;
        let problem = Problem::new(x.clone(), y.clone()).unwrap();
        let (sig, noise, total) =
            residual_decomposition(&problem, &[1], &DVector::zeros(4), None).unwrap();
        assert!((total - (x * beta_star).norm()).abs() < 1e-10);
        assert!((sig - total).abs() < 1e-9);
        assert!(noise < 1e-9);
    }

    #[test]
    fn residual_rule_threshold_values() {
        // sigma = 1, n = 100: sqrt(100 + 2 sqrt(100 ln 100)) ~ 11.9549.
        let thr = residual_rule_threshold(1.0, 100);
        let hand = (100.0 + 2.0 * (100.0 * 100.0_f64.ln()).sqrt()).sqrt();
        assert!((thr - hand).abs() < 1e-12 * hand);
        let mut r = DVector::zeros(100);
        r[0] = 11.0;
        assert!(stop_rule_residual(&r, 1.0, 100));
        assert!(stop_rule_residual(&DVector::zeros(100), 1.0, 100));
        assert!(!stop_rule_residual(&r, 1e-12, 100));
    }

    #[test]
    fn gradient_rule_on_orthogonal_design() {
        // Orthogonal columns: residual equal to one column makes
        // |X^T r|_inf = |X_1|^2, compared against the verbatim threshold.
        let n = 16;
        let mut x = DMatrix::zeros(n, 3);
        for j in 0..3 {
            x[(j, j)] = 2.0;
        }
        let problem = Problem::new(x.clone(), DVector::zeros(n)).unwrap();
        let r = x.column(0).into_owned();
        let lhs = problem.x().tr_mul(&r).amax();
        assert!((lhs - 4.0).abs() < 1e-14);
        let sigma = 1.0;
        let thr = gradient_rule_threshold(&problem, sigma);
        let hand = 2.0 * sigma * (2.0 * (3.0_f64).ln()).sqrt();
        assert!((thr - hand).abs() < 1e-12);
        assert_eq!(stop_rule_gradient(&problem, &r, sigma), lhs <= thr);
        // Monotone in sigma: firing at sigma implies firing at 2 sigma.
        if stop_rule_gradient(&problem, &r, sigma) {
            assert!(stop_rule_gradient(&problem, &r, 2.0 * sigma));
        }
        assert!(stop_rule_gradient(&problem, &DVector::zeros(n), 1e-9));
    }

    #[test]
    fn strong_signal_evaluation() {
        let report = ConditionReport {
            gamma: 1.0,
            gamma_max: 1.0,
            eta: 0.5,
            mu: 0.0,
            s: 1,
            cond_number: 1.0,
            tau_bar: None,
            lbiss_bound: None,
        };
        let mut beta = DVector::zeros(100);
        beta[0] = 1.0;
        let truth = GroundTruth::new(beta, 1.0).unwrap();
        // Threshold = max(4, 32) sqrt(ln 100 / 1e4) ~ 0.6867 < 1.
        assert!(strong_signal_check(&report, &truth, 10_000, 100, 1.0));
        let thr = 32.0 * (100.0_f64.ln() / 1e4).sqrt();
        assert!((thr - 0.6867091284125911).abs() < 1e-12);
        // Just below the threshold fails.
        let mut weak = DVector::zeros(100);
        weak[0] = thr - 1e-9;
        let weak_truth = GroundTruth::new(weak, 1.0).unwrap();
        assert!(!strong_signal_check(&weak_truth_report(), &weak_truth, 10_000, 100, 1.0));
        // sigma = 0 is always strong enough.
        let mut any = DVector::zeros(100);
        any[0] = 1e-12;
        let noiseless = GroundTruth::new(any, 0.0).unwrap();
        assert!(strong_signal_check(&weak_truth_report(), &noiseless, 10_000, 100, 1.0));
    }

    fn weak_truth_report() -> ConditionReport {
        ConditionReport {
            gamma: 1.0,
            gamma_max: 1.0,
            eta: 0.5,
            mu: 0.0,
            s: 1,
            cond_number: 1.0,
            tau_bar: None,
            lbiss_bound: None,
        }
    }

    #[test]
    fn discrete_bihari_on_scalar_oracle_run() {
        // Oracle dynamics of the 1-D example: X = [1], y = 2.
        let problem = Problem::new(
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_column_slice(&[2.0]),
        )
        .unwrap();
        let kappa = 1.0;
        let alpha = 0.1;
        let trace = crate::lb::lb_run(
            &problem,
            kappa,
            alpha,
            &crate::lb::LbOptions {
                max_iters: 400,
                ..Default::default()
            },
        )
        .unwrap();
        let beta_tilde = DVector::from_column_slice(&[2.0]);
        let opnorm = 1.0;
        let (holds, worst) =
            verify_discrete_bihari(&trace, &beta_tilde, 1.0, kappa, alpha, opnorm).unwrap();
        assert!(holds, "worst slack {worst}");

        // By k ~ 400 the scalar recursion has contracted onto its fixed point
        // to rounding level, so the tail of the trace exercises the
        // degenerate Psi ~ 0 case where both sides vanish.
        let last = trace.records.last().unwrap();
        assert!((last.beta[0] - 2.0).abs() < 1e-12);

        // An all-zero reference has no support to build F from.
        let bt0 = DVector::from_column_slice(&[0.0]);
        assert!(verify_discrete_bihari(&trace, &bt0, 1.0, kappa, alpha, 1.0).is_err());

        // Thinned traces are rejected.
        let thin = crate::lb::lb_run(
            &problem,
            kappa,
            alpha,
            &crate::lb::LbOptions {
                max_iters: 40,
                record_stride: 7,
                ..Default::default()
            },
        )
        .unwrap();
        match verify_discrete_bihari(&thin, &beta_tilde, 1.0, kappa, alpha, opnorm) {
            Err(Error::StrideTooCoarse { .. }) => {}
            other => panic!("expected stride error, got {other:?}"),
        }
    }
}
