//! Error type shared by all solvers and diagnostics.

use thiserror::Error;

/// Errors raised by solvers, diagnostics, and data generation.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input (dimensions, NaN/Inf entries, invalid parameters).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A restricted design matrix is numerically rank deficient where full
    /// column rank is required.
    #[error(
        "restricted design is numerically singular: smallest singular value {smallest:.6e} \
         (largest {largest:.6e}, tolerance ratio {tol:.1e})"
    )]
    SingularDesign {
        smallest: f64,
        largest: f64,
        tol: f64,
    },

    /// An operation that needs a nonempty support received an empty one.
    #[error("empty support set: {0}")]
    EmptySupport(&'static str),

    /// Mutual incoherence bound of condition A3 violated.
    #[error("A3 violated: mu = {mu} is not below 1/(2s-1) = {bound:.6} for s = {s}")]
    IncoherenceBound { mu: f64, s: usize, bound: f64 },

    /// The damping parameter is too small for the requested bound-corrected
    /// stopping time: requires B < kappa * eta.
    #[error("kappa too small: need B < kappa*eta but B = {b:.6e} and kappa*eta = {kappa_eta:.6e}")]
    KappaTooSmall { b: f64, kappa_eta: f64 },

    /// Iterates blew up; the step-size condition kappa*alpha*|X_S X_S*| < 2
    /// is the convergence guard.
    #[error(
        "divergent iterates at k = {iter}: step size violates the bound \
         kappa*alpha*|X_S X_S*| < 2 (observed kappa*alpha*|X X*| = {observed:.3})"
    )]
    Divergence { iter: usize, observed: f64 },

    /// Discrete step condition produced a nonpositive effective convexity
    /// gamma_tilde = gamma*(1 - kappa*alpha*|X_S X_S*|/2).
    #[error("step condition violated: gamma_tilde = {gamma_tilde:.6e} <= 0")]
    StepCondition { gamma_tilde: f64 },

    /// Evaluation time outside the computed path domain.
    #[error("t = {t} outside the path domain [0, {end}]")]
    OutOfDomain { t: f64, end: f64 },

    /// An iterative solver hit its iteration cap before reaching tolerance.
    #[error("{what} did not converge within {iters} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    /// A vector failed the subgradient-of-l1 validation.
    #[error("not a valid subgradient of the l1 norm at coordinate {index}: {reason}")]
    SubgradientValidation { index: usize, reason: String },

    /// A trace with thinned records was passed where adjacent iterates are
    /// required.
    #[error("full-stride trace required: records jump from k = {from} to k = {to}")]
    StrideTooCoarse { from: usize, to: usize },

    /// Requested covariance matrix is not positive definite.
    #[error("covariance is not positive definite: {0}")]
    CovarianceNotPd(String),

    /// Shard plan inconsistent with the problem dimensions.
    #[error("shard plan mismatch: {0}")]
    ShardPlan(String),
}

pub type Result<T> = std::result::Result<T, Error>;
