//! Core data model: the observed problem, the planted ground truth, the
//! shrink operator, the oracle estimator, and the A1/A2/A3 condition
//! calculators with their stopping-time formulas.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff declaring a restricted design rank
/// deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Observed data `(y, X)` with cached per-column norms `|X_j|/sqrt(n)`.
///
/// Immutable after construction; every solver in the crate reads from a
/// shared `Problem`.
#[derive(Debug, Clone)]
pub struct Problem {
    y: DVector<f64>,
    x: DMatrix<f64>,
    column_norms_n: DVector<f64>,
}

impl Problem {
    /// Builds a problem from a dense design matrix (n rows, p columns) and a
    /// response of length n. Rejects empty shapes and non-finite entries.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n == 0 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "design must have n >= 1 and p >= 1, got {n} x {p}"
            )));
        }
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "response length {} does not match n = {n}",
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "design or response contains NaN/Inf".into(),
            ));
        }
        let sqrt_n = (n as f64).sqrt();
        let column_norms_n = DVector::from_fn(p, |j, _| x.column(j).norm() / sqrt_n);
        Ok(Self {
            y,
            x,
            column_norms_n,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Cached `|X_j|/sqrt(n)` for every column j.
    pub fn column_norms_n(&self) -> &DVector<f64> {
        &self.column_norms_n
    }

    /// Residual `y - X beta`.
    pub fn residual(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }

    /// Dual gradient `(1/n) X^T (y - X beta)`.
    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let r = self.residual(beta);
        self.x.tr_mul(&r) / self.n() as f64
    }

    /// Gram matrix `X^T X / n`.
    pub fn gram_n(&self) -> DMatrix<f64> {
        self.x.tr_mul(&self.x) / self.n() as f64
    }

    /// New problem restricted to the given columns, in the given order.
    pub fn restrict_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.iter().any(|&j| j >= self.p()) {
            return Err(Error::InvalidInput("column index out of range".into()));
        }
        let x_s = self.x.select_columns(cols.iter());
        Problem::new(x_s, self.y.clone())
    }

    /// Largest `|X_j|/sqrt(n)` over the complement of `support`
    /// (over all columns when the complement is empty).
    pub fn max_colnorm_off_support(&self, support: &[usize]) -> f64 {
        let in_s = membership(self.p(), support);
        let mut best = f64::NEG_INFINITY;
        for j in 0..self.p() {
            if !in_s[j] {
                best = best.max(self.column_norms_n[j]);
            }
        }
        if best.is_finite() {
            best
        } else {
            self.column_norms_n.max()
        }
    }
}

/// Planted signal: coefficients, support, and noise level of a synthetic
/// instance.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    beta_star: DVector<f64>,
    support: Vec<usize>,
    sigma: f64,
}

impl GroundTruth {
    /// Derives the support from the nonzero pattern of `beta_star`.
    pub fn new(beta_star: DVector<f64>, sigma: f64) -> Result<Self> {
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise level must be finite and nonnegative, got {sigma}"
            )));
        }
        if beta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("beta_star contains NaN/Inf".into()));
        }
        let support: Vec<usize> = (0..beta_star.len())
            .filter(|&i| beta_star[i] != 0.0)
            .collect();
        Ok(Self {
            beta_star,
            support,
            sigma,
        })
    }

    pub fn beta_star(&self) -> &DVector<f64> {
        &self.beta_star
    }

    /// Sorted indices of the nonzero coefficients.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Complement of the support.
    pub fn complement(&self) -> Vec<usize> {
        let in_s = membership(self.beta_star.len(), &self.support);
        (0..self.beta_star.len()).filter(|&i| !in_s[i]).collect()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Smallest nonzero magnitude; `None` for the all-zero signal.
    pub fn beta_min(&self) -> Option<f64> {
        self.support
            .iter()
            .map(|&i| self.beta_star[i].abs())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    /// Largest nonzero magnitude; `None` for the all-zero signal.
    pub fn beta_max(&self) -> Option<f64> {
        self.support
            .iter()
            .map(|&i| self.beta_star[i].abs())
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Checks the `s <= min(n, p)` and dimension contracts against a problem.
    pub fn validate_for(&self, problem: &Problem) -> Result<()> {
        if self.beta_star.len() != problem.p() {
            return Err(Error::InvalidInput(format!(
                "beta_star length {} does not match p = {}",
                self.beta_star.len(),
                problem.p()
            )));
        }
        let s = self.sparsity();
        if s > problem.n().min(problem.p()) {
            return Err(Error::InvalidInput(format!(
                "sparsity s = {s} exceeds min(n, p) = {}",
                problem.n().min(problem.p())
            )));
        }
        Ok(())
    }
}

/// Summary of the restricted-strong-convexity, irrepresentable, and mutual
/// incoherence conditions for a given support, plus the stopping quantities
/// derived from them when the noise level (and optionally kappa) is known.
#[derive(Debug, Clone)]
pub struct ConditionReport {
    /// Smallest eigenvalue of `X_S^T X_S / n` (condition A1).
    pub gamma: f64,
    /// Largest eigenvalue of `X_S^T X_S / n`.
    pub gamma_max: f64,
    /// `1 - |X_T^* X_S^dagger|_inf` (condition A2).
    pub eta: f64,
    /// Mutual coherence of the normalized columns (condition A3).
    pub mu: f64,
    /// Support size.
    pub s: usize,
    /// `gamma_max / gamma`.
    pub cond_number: f64,
    /// Stopping time; populated by [`ConditionReport::with_stopping_time`].
    pub tau_bar: Option<f64>,
    /// LBISS magnitude bound B; populated when kappa is supplied.
    pub lbiss_bound: Option<f64>,
}

impl ConditionReport {
    /// Fills `tau_bar` (and B when `kappa` is given) from the noise level.
    pub fn with_stopping_time(
        mut self,
        problem: &Problem,
        truth: &GroundTruth,
        kappa: Option<f64>,
    ) -> Result<Self> {
        let max_colnorm_t = problem.max_colnorm_off_support(truth.support());
        let b = match kappa {
            Some(_) => Some(lbiss_bound_b(problem, truth, self.gamma)?),
            None => None,
        };
        self.tau_bar = Some(tau_bar(
            self.eta,
            truth.sigma(),
            problem.n(),
            problem.p(),
            max_colnorm_t,
            kappa,
            b,
        )?);
        self.lbiss_bound = b;
        Ok(self)
    }
}

/// Componentwise soft-thresholding `sign(z) * max(|z| - lambda, 0)`.
pub fn shrink(z: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(Error::InvalidInput(format!(
            "shrink threshold must be nonnegative, got {lambda}"
        )));
    }
    Ok(z.map(|v| shrink_scalar(v, lambda)))
}

/// Scalar soft-thresholding.
#[inline]
pub fn shrink_scalar(z: f64, lambda: f64) -> f64 {
    let m = z.abs() - lambda;
    if m > 0.0 {
        m * z.signum()
    } else {
        0.0
    }
}

/// Subset least squares: the unique minimizer of `|y - X_S b|` placed back
/// into a length-p vector that is exactly zero off the support.
///
/// Fails with [`Error::SingularDesign`] when `X_S` is numerically rank
/// deficient.
pub fn oracle_estimator(problem: &Problem, support: &[usize]) -> Result<DVector<f64>> {
    if support.is_empty() {
        return Err(Error::EmptySupport("oracle estimator"));
    }
    let x_s = problem.x().select_columns(support.iter());
    let svd = x_s.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(Error::SingularDesign {
            smallest: smin / (problem.n() as f64).sqrt(),
            largest: smax / (problem.n() as f64).sqrt(),
            tol: RANK_TOL,
        });
    }
    let b_s = svd
        .solve(problem.y(), 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut beta = DVector::zeros(problem.p());
    for (k, &j) in support.iter().enumerate() {
        beta[j] = b_s[k];
    }
    Ok(beta)
}

/// Evaluates A1 (gamma), A2 (eta), and A3 (mu) for the given support.
///
/// `gamma` and the condition number come from the eigenvalues of
/// `X_S^T X_S / n`; `eta = 1 - |X_T^* X_S^dagger|_inf` with the infinity norm
/// as the maximum absolute row sum; `mu` is the largest normalized inner
/// product between distinct columns, computed after rescaling every column to
/// unit `|.|_n` norm.
pub fn check_conditions(problem: &Problem, support: &[usize]) -> Result<ConditionReport> {
    if support.is_empty() {
        return Err(Error::EmptySupport("condition check"));
    }
    if support.iter().any(|&j| j >= problem.p()) {
        return Err(Error::InvalidInput("support index out of range".into()));
    }
    let n = problem.n() as f64;
    let x_s = problem.x().select_columns(support.iter());
    let gram_s = x_s.tr_mul(&x_s) / n;
    let eig = gram_s.clone().symmetric_eigen();
    let gamma = eig.eigenvalues.min();
    let gamma_max = eig.eigenvalues.max();
    if !(gamma > RANK_TOL * RANK_TOL * gamma_max) || gamma <= 0.0 {
        return Err(Error::SingularDesign {
            smallest: gamma.max(0.0).sqrt(),
            largest: gamma_max.sqrt(),
            tol: RANK_TOL,
        });
    }

    let in_s = membership(problem.p(), support);
    let complement: Vec<usize> = (0..problem.p()).filter(|&j| !in_s[j]).collect();
    let eta = if complement.is_empty() {
        1.0
    } else {
        let x_t = problem.x().select_columns(complement.iter());
        // X_T^* X_S^dagger = (X_T^T X_S / n) (X_S^T X_S / n)^{-1}
        let cross = x_t.tr_mul(&x_s) / n;
        let gram_inv = gram_s.clone().try_inverse().ok_or(Error::SingularDesign {
            smallest: gamma.sqrt(),
            largest: gamma_max.sqrt(),
            tol: RANK_TOL,
        })?;
        let m = cross * gram_inv;
        let max_row_sum = (0..m.nrows())
            .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        1.0 - max_row_sum
    };

    let mu = mutual_coherence(problem);
    Ok(ConditionReport {
        gamma,
        gamma_max,
        eta,
        mu,
        s: support.len(),
        cond_number: gamma_max / gamma,
        tau_bar: None,
        lbiss_bound: None,
    })
}

/// Largest `|<X_i, X_j>_n|` over distinct columns after normalizing each
/// column to unit `|.|_n` norm. A3 is stated for normalized designs, so raw
/// designs are normalized here for mu only.
pub fn mutual_coherence(problem: &Problem) -> f64 {
    let p = problem.p();
    if p < 2 {
        return 0.0;
    }
    let n = problem.n() as f64;
    let gram = problem.x().tr_mul(problem.x()) / n;
    let norms = problem.column_norms_n();
    let mut mu = 0.0_f64;
    for i in 0..p {
        for j in (i + 1)..p {
            let d = norms[i] * norms[j];
            if d > 0.0 {
                mu = mu.max((gram[(i, j)] / d).abs());
            }
        }
    }
    mu
}

/// The A3 implication: for `mu < 1/(2s-1)` conditions A1 and A2 hold with
/// `gamma = 1 - mu(s-1)` and `eta = (1 - mu(2s-1)) / (1 - mu(s-1))`.
pub fn coherence_bounds(mu: f64, s: usize) -> Result<(f64, f64)> {
    if s == 0 {
        return Err(Error::EmptySupport("coherence bounds"));
    }
    if !(0.0..).contains(&mu) || mu.is_nan() {
        return Err(Error::InvalidInput(format!(
            "coherence must be nonnegative, got {mu}"
        )));
    }
    let bound = 1.0 / (2 * s - 1) as f64;
    if mu >= bound {
        return Err(Error::IncoherenceBound { mu, s, bound });
    }
    let gamma = 1.0 - mu * (s as f64 - 1.0);
    let eta = (1.0 - mu * (2 * s - 1) as f64) / gamma;
    Ok((gamma, eta))
}

/// The stopping time `tau_bar = (eta / 2 sigma) sqrt(n / log p) / max_colnorm_T`,
/// with the factor `eta` replaced by `(1 - B/(kappa eta)) eta` when a finite
/// `kappa` is supplied. Natural logarithm throughout.
pub fn tau_bar(
    eta: f64,
    sigma: f64,
    n: usize,
    p: usize,
    max_colnorm_t: f64,
    kappa: Option<f64>,
    b: Option<f64>,
) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "tau_bar needs sigma > 0, got {sigma}"
        )));
    }
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "tau_bar needs p >= 2 so that log p > 0, got p = {p}"
        )));
    }
    if max_colnorm_t <= 0.0 {
        return Err(Error::InvalidInput(
            "tau_bar needs a positive off-support column norm".into(),
        ));
    }
    let eta_eff = match kappa {
        None => eta,
        Some(kappa) => {
            let b = b.ok_or_else(|| {
                Error::InvalidInput("tau_bar with kappa requires the bound B".into())
            })?;
            let kappa_eta = kappa * eta;
            // kappa = inf is accepted and reduces to the kappa-free form.
            if kappa.is_finite() && b >= kappa_eta {
                return Err(Error::KappaTooSmall { b, kappa_eta });
            }
            (1.0 - b / kappa_eta) * eta
        }
    };
    Ok(eta_eff / (2.0 * sigma) * (n as f64 / (p as f64).ln()).sqrt() / max_colnorm_t)
}

/// The LBISS magnitude bound
/// `B = beta*_max + 2 sigma sqrt(log p / (gamma n)) + (|X beta*|_2 + 2 sigma sqrt(s log n)) / (n sqrt(gamma))`.
pub fn lbiss_bound_b(problem: &Problem, truth: &GroundTruth, gamma: f64) -> Result<f64> {
    if gamma <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "lbiss bound needs gamma > 0, got {gamma}"
        )));
    }
    let n = problem.n() as f64;
    let p = problem.p() as f64;
    let s = truth.sparsity() as f64;
    let sigma = truth.sigma();
    let beta_max = truth.beta_max().unwrap_or(0.0);
    let x_beta = problem.x() * truth.beta_star();
    Ok(beta_max
        + 2.0 * sigma * (p.ln() / (gamma * n)).sqrt()
        + (x_beta.norm() + 2.0 * sigma * (s * n.ln()).sqrt()) / (n * gamma.sqrt()))
}

pub(crate) fn membership(p: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; p];
    for &i in set {
        if i < p {
            m[i] = true;
        }
    }
    m
}
