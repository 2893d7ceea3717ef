//! Sign-constrained least squares
//! `min |y - X beta|^2  s.t.  beta_i >= 0 on plus_set, beta_i <= 0 on minus_set, beta_j = 0 elsewhere`,
//! solved by a primal active-set method (Lawson-Hanson with cached Gram
//! products). Always feasible: beta = 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{Problem, RANK_TOL};

/// Result of a sign-constrained least-squares solve.
#[derive(Debug, Clone)]
pub struct SignConstrainedSolution {
    /// Length-p minimizer; exactly zero off the constrained sets.
    pub beta: DVector<f64>,
    /// KKT multipliers of the active (clamped-at-zero) sign constraints,
    /// nonnegative; zero on free coordinates.
    pub multipliers: DVector<f64>,
    /// Set when the final passive-set design was rank deficient; `beta` is
    /// then the minimum-l2-norm choice among the optimizers of that set.
    pub nonunique: bool,
}

/// Solves the sign-constrained problem. `plus_set` and `minus_set` must be
/// disjoint; coordinates in neither set are fixed at zero.
pub fn solve_sign_constrained_ls(
    problem: &Problem,
    plus_set: &[usize],
    minus_set: &[usize],
) -> Result<SignConstrainedSolution> {
    solve_sign_constrained_ls_warm(problem, plus_set, minus_set, None)
}

/// Same as [`solve_sign_constrained_ls`] but seeded with a feasible starting
/// point (the path solver's consecutive subproblems differ by a coordinate or
/// two).
pub fn solve_sign_constrained_ls_warm(
    problem: &Problem,
    plus_set: &[usize],
    minus_set: &[usize],
    warm_start: Option<&DVector<f64>>,
) -> Result<SignConstrainedSolution> {
    let p = problem.p();
    let mut sign = vec![0i8; p];
    for &i in plus_set {
        if i >= p {
            return Err(Error::InvalidInput("plus_set index out of range".into()));
        }
        sign[i] = 1;
    }
    for &i in minus_set {
        if i >= p {
            return Err(Error::InvalidInput("minus_set index out of range".into()));
        }
        if sign[i] != 0 {
            return Err(Error::InvalidInput(format!(
                "coordinate {i} appears in both sign sets"
            )));
        }
        sign[i] = -1;
    }

    // Constrained coordinates in index order. Work in x_k = sign_i * beta_i >= 0
    // with columns A_k = sign_i * X_i: a plain NNLS.
    let cols: Vec<usize> = (0..p).filter(|&i| sign[i] != 0).collect();
    let m = cols.len();
    let mut beta = DVector::zeros(p);
    let mut multipliers = DVector::zeros(p);
    if m == 0 {
        return Ok(SignConstrainedSolution {
            beta,
            multipliers,
            nonunique: false,
        });
    }

    let mut a = problem.x().select_columns(cols.iter());
    for (k, &i) in cols.iter().enumerate() {
        if sign[i] < 0 {
            a.column_mut(k).neg_mut();
        }
    }
    let gram = a.tr_mul(&a);
    let rhs = a.tr_mul(problem.y());
    let kkt_tol = 1e-10 * rhs.amax().max(1.0);

    let mut x = DVector::<f64>::zeros(m);
    let mut passive = vec![false; m];
    if let Some(w) = warm_start {
        for (k, &i) in cols.iter().enumerate() {
            let v = f64::from(sign[i]) * w[i];
            if v > 0.0 {
                x[k] = v;
                passive[k] = true;
            }
        }
    }

    let max_outer = 10 * p.max(1);
    let mut banned = vec![false; m];
    let mut outer = 0;
    loop {
        // Dual w = A^T (y - A x) over the clamped set drives insertions.
        let w = &rhs - &gram * &x;
        let mut best: Option<(usize, f64)> = None;
        for k in 0..m {
            if !passive[k] && !banned[k] && w[k] > kkt_tol && best.is_none_or(|(_, bw)| w[k] > bw)
            {
                best = Some((k, w[k]));
            }
        }
        let Some((enter, _)) = best else {
            // KKT holds: free coordinates have zero gradient by the inner
            // solve, clamped ones have w <= tol i.e. the gradient pushes
            // toward the infeasible side.
            for k in 0..m {
                if !passive[k] {
                    multipliers[cols[k]] = (-w[k]).max(0.0);
                }
            }
            break;
        };
        if outer >= max_outer {
            break;
        }
        outer += 1;
        passive[enter] = true;

        // Inner loop: unconstrained solve on the passive set, stepping back
        // to feasibility while any passive entry would go negative.
        loop {
            let idx: Vec<usize> = (0..m).filter(|&k| passive[k]).collect();
            let (z, _) = solve_passive(&gram, &rhs, &a, &idx);
            let mut alpha = 1.0_f64;
            let mut blockers: Vec<usize> = Vec::new();
            for (pos, &k) in idx.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let denom = x[k] - z[pos];
                    let step = if denom > 0.0 { x[k] / denom } else { 0.0 };
                    if step < alpha {
                        alpha = step;
                        blockers.clear();
                        blockers.push(k);
                    } else if step == alpha && alpha < 1.0 {
                        blockers.push(k);
                    }
                }
            }
            if blockers.is_empty() {
                for (pos, &k) in idx.iter().enumerate() {
                    x[k] = z[pos];
                }
                banned.fill(false);
                break;
            }
            for (pos, &k) in idx.iter().enumerate() {
                x[k] += alpha * (z[pos] - x[k]);
                if x[k] < 0.0 {
                    x[k] = 0.0;
                }
            }
            for &k in &blockers {
                x[k] = 0.0;
                passive[k] = false;
            }
            if !passive[enter] {
                // Entering coordinate immediately clamped back (possible only
                // under rank deficiency / borderline duals): ban it until some
                // other insertion makes progress.
                banned[enter] = true;
                break;
            }
        }
    }

    // Non-uniqueness is a property of the whole constrained design: when it
    // is rank deficient the optimal face can be a segment. Canonicalize by
    // the minimum-norm least-squares point whenever that point is
    // sign-feasible (it then attains the same unique fit X beta).
    let nonunique = gram.clone().cholesky().is_none();
    if nonunique {
        let all: Vec<usize> = (0..m).collect();
        let (z_mn, _) = solve_passive(&gram, &rhs, &a, &all);
        let scale = z_mn.amax().max(1.0);
        if z_mn.iter().all(|&v| v >= -1e-10 * scale) {
            for k in 0..m {
                x[k] = z_mn[k].max(0.0);
            }
        }
    }

    for (k, &i) in cols.iter().enumerate() {
        beta[i] = f64::from(sign[i]) * x[k];
    }
    Ok(SignConstrainedSolution {
        beta,
        multipliers,
        nonunique,
    })
}

/// Unconstrained least squares on the passive columns: Cholesky on the cached
/// Gram block, falling back to a minimum-norm solve through the SVD of the
/// passive column block when the Gram is rank deficient. Returns the solution
/// (in passive order) and the deficiency flag.
fn solve_passive(
    gram: &DMatrix<f64>,
    rhs: &DVector<f64>,
    a: &DMatrix<f64>,
    idx: &[usize],
) -> (DVector<f64>, bool) {
    let k = idx.len();
    let g = DMatrix::from_fn(k, k, |r, c| gram[(idx[r], idx[c])]);
    let b = DVector::from_fn(k, |r, _| rhs[idx[r]]);
    if let Some(chol) = g.clone().cholesky() {
        let sol = chol.solve(&b);
        if sol.iter().all(|v| v.is_finite()) {
            let residual = (&g * &sol - &b).amax();
            if residual <= 1e-9 * b.amax().max(1.0) {
                return (sol, false);
            }
        }
    }
    // Minimum-norm solution z = V S^{-1} U^T y = V S^{-2} V^T (A_P^T y),
    // using the cached A_P^T y = b.
    let a_p = a.select_columns(idx.iter());
    let svd = a_p.svd(false, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax;
    let deficient = svd.singular_values.iter().any(|&s| s <= eps);
    let vt = svd.v_t.as_ref().expect("svd computed with v_t");
    let mut c = vt * &b;
    for i in 0..svd.singular_values.len() {
        let s = svd.singular_values[i];
        c[i] = if s > eps { c[i] / (s * s) } else { 0.0 };
    }
    (vt.tr_mul(&c), deficient)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_problem(y: &[f64]) -> Problem {
        let n = y.len();
        Problem::new(DMatrix::identity(n, n), DVector::from_column_slice(y)).unwrap()
    }

    #[test]
    fn separable_quadratic() {
        let p = identity_problem(&[3.0, 1.0]);
        let sol = solve_sign_constrained_ls(&p, &[0], &[]).unwrap();
        assert_eq!(sol.beta.as_slice(), &[3.0, 0.0]);
        assert!(!sol.nonunique);
    }

    #[test]
    fn binding_constraint_yields_multiplier() {
        let p = identity_problem(&[-3.0, 1.0]);
        let sol = solve_sign_constrained_ls(&p, &[0], &[]).unwrap();
        assert_eq!(sol.beta.as_slice(), &[0.0, 0.0]);
        assert!(sol.multipliers[0] > 0.0);
        assert!((sol.multipliers[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn minus_set_flips_the_constraint() {
        let p = identity_problem(&[-3.0, 1.0]);
        let sol = solve_sign_constrained_ls(&p, &[], &[0]).unwrap();
        assert_eq!(sol.beta.as_slice(), &[-3.0, 0.0]);
    }

    #[test]
    fn disjointness_enforced() {
        let p = identity_problem(&[1.0]);
        assert!(solve_sign_constrained_ls(&p, &[0], &[0]).is_err());
    }

    #[test]
    fn rank_deficient_passive_set_flags_nonuniqueness() {
        // Two identical columns, both constrained positive: optimizers form a
        // segment; the minimum-norm one splits the weight evenly.
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let p = Problem::new(x, DVector::from_column_slice(&[2.0, 0.0])).unwrap();
        let sol = solve_sign_constrained_ls(&p, &[0, 1], &[]).unwrap();
        assert!(sol.nonunique);
        assert!((sol.beta[0] - 1.0).abs() < 1e-9, "beta = {:?}", sol.beta);
        assert!((sol.beta[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let x = DMatrix::from_fn(8, 4, |i, j| ((i * 5 + j * 11 + 2) as f64 * 0.37).sin());
        let y = DVector::from_fn(8, |i, _| ((i * 3 + 1) as f64 * 0.53).cos());
        let p = Problem::new(x, y).unwrap();
        let cold = solve_sign_constrained_ls(&p, &[0, 2], &[1, 3]).unwrap();
        let warm =
            solve_sign_constrained_ls_warm(&p, &[0, 2], &[1, 3], Some(&cold.beta)).unwrap();
        assert!((cold.beta.clone() - warm.beta).amax() < 1e-10);
    }
}
