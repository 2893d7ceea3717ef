//! Shared test oracles, kept independent of the library's solver paths.
#![allow(dead_code)] // each test binary uses a different subset

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use iss_core::Problem;

pub fn gaussian_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, m, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Minimum-norm least squares via SVD, independent of the library solvers.
pub fn min_norm_ls(a: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut c = u.tr_mul(y);
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        c[i] = if s > 1e-12 * smax { c[i] / s } else { 0.0 };
    }
    vt.tr_mul(&c)
}

/// Brute-force oracle for
/// `min |y - X beta|^2, sign_i beta_i >= 0 (i constrained), beta_j = 0 (j free)`:
/// enumerate every subset of the constrained coordinates as the nonzero set,
/// solve unconstrained least squares there, keep the best sign-feasible
/// candidate. Exponential in the number of constrained coordinates.
pub fn brute_force_sign_ls(
    problem: &Problem,
    plus_set: &[usize],
    minus_set: &[usize],
) -> (DVector<f64>, f64) {
    let p = problem.p();
    let mut signs = vec![0i8; p];
    for &i in plus_set {
        signs[i] = 1;
    }
    for &i in minus_set {
        signs[i] = -1;
    }
    let constrained: Vec<usize> = (0..p).filter(|&i| signs[i] != 0).collect();
    let m = constrained.len();
    let mut best = (DVector::zeros(p), problem.y().norm_squared());
    for mask in 0u32..(1 << m) {
        let subset: Vec<usize> = (0..m)
            .filter(|&k| mask & (1 << k) != 0)
            .map(|k| constrained[k])
            .collect();
        if subset.is_empty() {
            continue;
        }
        let a = problem.x().select_columns(subset.iter());
        let b = min_norm_ls(&a, problem.y());
        let feasible = subset
            .iter()
            .enumerate()
            .all(|(k, &i)| f64::from(signs[i]) * b[k] >= -1e-10);
        if !feasible {
            continue;
        }
        let obj = (problem.y() - &a * &b).norm_squared();
        if obj < best.1 {
            let mut beta = DVector::zeros(p);
            for (k, &i) in subset.iter().enumerate() {
                beta[i] = b[k];
            }
            best = (beta, obj);
        }
    }
    best
}

/// Fine-grid simulation of the inverse-scale-space inclusion by projected
/// subgradient stepping: the dual moves with the fixed gradient of the
/// current piece (projected onto the unit cube) and the primal re-solves the
/// sign-constrained subproblem via the enumeration oracle whenever the
/// boundary pattern changes. Returns `X beta(t)` at the requested times.
pub fn fine_grid_iss_fit(
    problem: &Problem,
    dt: f64,
    t_end: f64,
    sample_times: &[f64],
) -> Vec<DVector<f64>> {
    let p = problem.p();
    let n = problem.n() as f64;
    let mut rho = DVector::<f64>::zeros(p);
    let mut beta = DVector::<f64>::zeros(p);
    let mut pattern = vec![0i8; p];
    let mut g = problem.x().tr_mul(&(problem.y() - problem.x() * &beta)) / n;

    let mut samples: Vec<(usize, f64)> = sample_times.iter().copied().enumerate().collect();
    samples.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut out: Vec<DVector<f64>> = vec![DVector::zeros(problem.n()); sample_times.len()];
    let mut next = 0usize;

    let steps = (t_end / dt).ceil() as usize;
    let boundary_tol = 1e-9;
    for step in 0..=steps {
        let t = step as f64 * dt;
        while next < samples.len() && samples[next].1 <= t {
            out[samples[next].0] = problem.x() * &beta;
            next += 1;
        }
        // Advance the dual and clamp to the unit cube.
        for i in 0..p {
            rho[i] = (rho[i] + dt * g[i]).clamp(-1.0, 1.0);
        }
        let new_pattern: Vec<i8> = (0..p)
            .map(|i| {
                if rho[i] >= 1.0 - boundary_tol {
                    1
                } else if rho[i] <= -1.0 + boundary_tol {
                    -1
                } else {
                    0
                }
            })
            .collect();
        if new_pattern != pattern {
            pattern = new_pattern;
            let plus: Vec<usize> = (0..p).filter(|&i| pattern[i] == 1).collect();
            let minus: Vec<usize> = (0..p).filter(|&i| pattern[i] == -1).collect();
            beta = brute_force_sign_ls(problem, &plus, &minus).0;
            g = problem.x().tr_mul(&(problem.y() - problem.x() * &beta)) / n;
        }
    }
    while next < samples.len() {
        out[samples[next].0] = problem.x() * &beta;
        next += 1;
    }
    out
}
