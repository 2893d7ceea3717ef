//! Sparse-recovery solution paths via differential inclusions.
//!
//! The crate computes three regularization paths for the model
//! `y = X beta* + eps`:
//!
//! - the exact piecewise Bregman inverse-scale-space path ([`iss`]),
//! - the continuous Linearized Bregman path and its discrete two-line
//!   iteration ([`lb`]), including a column-sharded variant ([`parallel`]),
//! - a KKT-certified LASSO grid baseline ([`lasso`]),
//!
//! together with the condition numbers and stopping times that govern when a
//! path point recovers the oracle estimator ([`model`], [`diagnostics`]) and
//! a Monte Carlo harness scoring selection orders by ROC/AUC
//! ([`experiments`]).

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod iss;
pub mod lasso;
pub mod lb;
pub mod model;
pub mod parallel;

pub use error::{Error, Result};
pub use model::{
    check_conditions, coherence_bounds, lbiss_bound_b, mutual_coherence, oracle_estimator, shrink,
    shrink_scalar, tau_bar, ConditionReport, GroundTruth, Problem,
};

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// Dense standard-normal matrix; full rank almost surely.
    pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal))
    }

    pub fn gaussian_vector(n: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
    }
}
