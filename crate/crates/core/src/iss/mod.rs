//! Exact piecewise solution path of the Bregman inverse scale space dynamics
//! `d rho/dt = (1/n) X^T (y - X beta)`, `rho in subdifferential of |beta|_1`:
//! the dual `rho` is piecewise linear, the primal `beta` piecewise constant,
//! and each breakpoint re-solves a sign-constrained least squares problem.

mod sign_ls;

pub use sign_ls::{
    solve_sign_constrained_ls, solve_sign_constrained_ls_warm, SignConstrainedSolution,
};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::Problem;

/// Knobs for the path construction.
#[derive(Debug, Clone)]
pub struct IssOptions {
    /// Stop once the next breakpoint would exceed this time.
    pub t_max: f64,
    /// Hard cap on the number of breakpoints; exceeding it truncates the path.
    pub max_breakpoints: usize,
    /// Absolute tolerance on `|rho| - 1` for grouping simultaneous boundary
    /// hits into one breakpoint.
    pub boundary_tol: f64,
}

impl Default for IssOptions {
    fn default() -> Self {
        Self {
            t_max: f64::INFINITY,
            max_breakpoints: 2000,
            boundary_tol: 1e-9,
        }
    }
}

/// Why the path construction stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathEnd {
    /// Gradient vanished: the final piece extends to t = infinity.
    Terminated,
    /// The next breakpoint lies beyond `t_max`; valid on `[0, t_max]`.
    ReachedTMax,
    /// `max_breakpoints` hit; valid up to the last computed breakpoint.
    TruncatedBreakpoints,
}

/// The exact piecewise path.
///
/// Piece `k` is the interval `[t_k, t_{k+1})` on which `beta` is the constant
/// `beta_on_piece[k]` and `rho` moves linearly from `rho_at[k]` with slope
/// `slope_on_piece[k] = (1/n) X^T (y - X beta_k)` (zeroed on coordinates
/// pinned at the boundary).
#[derive(Debug, Clone)]
pub struct IssPath {
    breakpoints: Vec<f64>,
    rho_at: Vec<DVector<f64>>,
    beta_on_piece: Vec<DVector<f64>>,
    slope_on_piece: Vec<DVector<f64>>,
    active_signs: Vec<Vec<i8>>,
    nonunique_piece: Vec<bool>,
    end: PathEnd,
    domain_end: f64,
}

impl IssPath {
    /// Breakpoints `t_0 = 0 < t_1 < ...`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Dual vectors at the breakpoints.
    pub fn rho_at_breakpoints(&self) -> &[DVector<f64>] {
        &self.rho_at
    }

    /// Primal vectors, constant per piece.
    pub fn beta_on_pieces(&self) -> &[DVector<f64>] {
        &self.beta_on_piece
    }

    /// Per-piece sign pattern of the boundary set (+1/-1/0 per coordinate).
    pub fn active_signs(&self) -> &[Vec<i8>] {
        &self.active_signs
    }

    /// Per-piece flag: the sign-constrained solve hit a rank-deficient
    /// passive set and returned the minimum-norm optimizer.
    pub fn nonunique_pieces(&self) -> &[bool] {
        &self.nonunique_piece
    }

    /// True when the gradient vanished and the final piece extends forever.
    pub fn terminated(&self) -> bool {
        self.end == PathEnd::Terminated
    }

    /// True when the breakpoint cap cut the path short.
    pub fn truncated(&self) -> bool {
        self.end == PathEnd::TruncatedBreakpoints
    }

    pub fn end(&self) -> PathEnd {
        self.end
    }

    /// Largest valid evaluation time (infinite for terminated paths).
    pub fn domain_end(&self) -> f64 {
        self.domain_end
    }

    /// Index of the piece containing `t`.
    fn piece_index(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) || (t > self.domain_end) {
            return Err(Error::OutOfDomain {
                t,
                end: self.domain_end,
            });
        }
        // partition_point gives the first breakpoint strictly above t.
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Ok(k.saturating_sub(1))
    }

    /// `(rho(t), beta(t))`: linear interpolation of the dual on the containing
    /// piece and the piece's constant primal. Exact stored values at
    /// breakpoints.
    pub fn eval(&self, t: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let k = self.piece_index(t)?;
        let dt = t - self.breakpoints[k];
        let rho = if dt == 0.0 {
            self.rho_at[k].clone()
        } else {
            &self.rho_at[k] + &self.slope_on_piece[k] * dt
        };
        Ok((rho, self.beta_on_piece[k].clone()))
    }

    /// Temporal mean `(1/t) integral_0^t beta(s) ds`, computed exactly from
    /// the piecewise-constant primal.
    pub fn mean(&self, t: f64) -> Result<DVector<f64>> {
        if !(t > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mean path is undefined at t = {t}"
            )));
        }
        let k_last = self.piece_index(t)?;
        let mut acc = DVector::zeros(self.beta_on_piece[0].len());
        for k in 0..=k_last {
            let start = self.breakpoints[k];
            let end = if k == k_last {
                t
            } else {
                self.breakpoints[k + 1]
            };
            if end > start {
                acc += &self.beta_on_piece[k] * (end - start);
            }
        }
        Ok(acc / t)
    }

    /// True iff the support of `beta` never loses a coordinate from piece to
    /// piece, up to (and including) the piece containing `up_to_t`.
    pub fn is_incremental(&self, up_to_t: f64) -> bool {
        let k_last = match self.piece_index(up_to_t.min(self.domain_end)) {
            Ok(k) => k,
            Err(_) => return true,
        };
        for k in 1..=k_last {
            let prev = &self.beta_on_piece[k - 1];
            let cur = &self.beta_on_piece[k];
            for i in 0..prev.len() {
                if prev[i] != 0.0 && cur[i] == 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// First time each coordinate becomes nonzero, if ever.
    pub fn first_entry_times(&self) -> Vec<Option<f64>> {
        let p = self.beta_on_piece[0].len();
        let mut out = vec![None; p];
        for (k, beta) in self.beta_on_piece.iter().enumerate() {
            for i in 0..p {
                if out[i].is_none() && beta[i] != 0.0 {
                    out[i] = Some(self.breakpoints[k]);
                }
            }
        }
        out
    }
}

/// Runs the breakpoint-stepping algorithm and returns the exact path.
///
/// At each piece the candidate crossing time of every interior coordinate is
/// `(sign - rho_j) / g_j` toward the boundary its slope points at; the
/// smallest positive candidate is the next breakpoint, all coordinates within
/// `boundary_tol` of the boundary change status together, and the primal for
/// the new piece solves the sign-constrained least squares on the updated
/// boundary sets. Coordinates clamped at zero whose gradient pulls the dual
/// strictly inside `(-1, 1)` leave the boundary set first.
pub fn iss_path(problem: &Problem, options: &IssOptions) -> Result<IssPath> {
    if !(options.t_max > 0.0) {
        return Err(Error::InvalidInput(format!(
            "t_max must be positive, got {}",
            options.t_max
        )));
    }
    let p = problem.p();
    let mut rho = DVector::<f64>::zeros(p);
    let mut beta = DVector::<f64>::zeros(p);
    let mut sigma = vec![0i8; p];

    let g0 = problem.gradient(&beta);
    let scale = g0.amax().max(1.0);
    let zero_tol = 1e-13 * scale;

    let mut path = IssPath {
        breakpoints: vec![0.0],
        rho_at: vec![rho.clone()],
        beta_on_piece: vec![beta.clone()],
        slope_on_piece: Vec::new(),
        active_signs: vec![sigma.clone()],
        nonunique_piece: vec![false],
        end: PathEnd::Terminated,
        domain_end: f64::INFINITY,
    };

    loop {
        let t_k = *path.breakpoints.last().unwrap();
        let g = problem.gradient(&beta);

        // Variable dropping: a coordinate pinned at +-1 with beta = 0 whose
        // dual would move strictly into the interior leaves the boundary set.
        for i in 0..p {
            if sigma[i] != 0 && beta[i] == 0.0 && f64::from(sigma[i]) * g[i] < -zero_tol {
                sigma[i] = 0;
            }
        }

        let mut slope = g.clone();
        for i in 0..p {
            if sigma[i] != 0 {
                slope[i] = 0.0;
            }
        }

        let mut dt_min = f64::INFINITY;
        for i in 0..p {
            if sigma[i] != 0 {
                continue;
            }
            let gi = slope[i];
            let dt = if gi > zero_tol {
                (1.0 - rho[i]) / gi
            } else if gi < -zero_tol {
                (-1.0 - rho[i]) / gi
            } else {
                continue;
            };
            if dt < dt_min {
                dt_min = dt;
            }
        }

        if !dt_min.is_finite() {
            // Gradient vanished: equilibrium, the piece extends forever.
            path.slope_on_piece.push(DVector::zeros(p));
            path.end = PathEnd::Terminated;
            path.domain_end = f64::INFINITY;
            break;
        }
        let t_next = t_k + dt_min;
        if t_next > options.t_max {
            path.slope_on_piece.push(slope);
            path.end = PathEnd::ReachedTMax;
            path.domain_end = options.t_max;
            break;
        }

        for i in 0..p {
            if sigma[i] == 0 {
                rho[i] += dt_min * slope[i];
            }
        }
        // Boundary detection with tie grouping.
        for i in 0..p {
            if sigma[i] == 0 {
                if rho[i] >= 1.0 - options.boundary_tol {
                    sigma[i] = 1;
                    rho[i] = 1.0;
                } else if rho[i] <= -1.0 + options.boundary_tol {
                    sigma[i] = -1;
                    rho[i] = -1.0;
                }
            }
        }

        let plus: Vec<usize> = (0..p).filter(|&i| sigma[i] == 1).collect();
        let minus: Vec<usize> = (0..p).filter(|&i| sigma[i] == -1).collect();
        let sol = solve_sign_constrained_ls_warm(problem, &plus, &minus, Some(&beta))?;
        beta = sol.beta;

        path.slope_on_piece.push(slope);
        path.breakpoints.push(t_next);
        path.rho_at.push(rho.clone());
        path.beta_on_piece.push(beta.clone());
        path.active_signs.push(sigma.clone());
        path.nonunique_piece.push(sol.nonunique);

        if path.breakpoints.len() > options.max_breakpoints {
            path.end = PathEnd::TruncatedBreakpoints;
            path.domain_end = t_next;
            path.slope_on_piece.push(DVector::zeros(p));
            break;
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn identity_problem(y: &[f64]) -> Problem {
        let n = y.len();
        Problem::new(DMatrix::identity(n, n), DVector::from_column_slice(y)).unwrap()
    }

    // With X = I_2 and n = 2 the dual slope is (1/2)(y - beta): coordinate 0
    // enters at t = 2/3 with value y_0 = 3, coordinate 1 at t = 2 with value
    // y_1 = 1, then the gradient vanishes. These are the one-dimensional
    // closed-form entry times n/|y_i| of the shared-n dynamics.
    #[test]
    fn identity_design_breakpoints() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        assert!(path.terminated());
        let bk = path.breakpoints();
        assert_eq!(bk.len(), 3);
        assert!((bk[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((bk[2] - 2.0).abs() < 1e-12);
        assert!((path.beta_on_pieces()[1].as_slice()[0] - 3.0).abs() < 1e-12);
        assert_eq!(path.beta_on_pieces()[1][1], 0.0);
        assert!((path.beta_on_pieces()[2].as_slice()[0] - 3.0).abs() < 1e-12);
        assert!((path.beta_on_pieces()[2].as_slice()[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_response_terminates_immediately() {
        let p = identity_problem(&[0.0, 0.0]);
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        assert!(path.terminated());
        assert_eq!(path.breakpoints().len(), 1);
        assert_eq!(path.beta_on_pieces()[0].amax(), 0.0);
        // Terminated path extends to any t.
        let (rho, beta) = path.eval(1e6).unwrap();
        assert_eq!(rho.amax(), 0.0);
        assert_eq!(beta.amax(), 0.0);
    }

    #[test]
    fn eval_mid_piece_interpolates_the_dual() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        // Initial conditions.
        let (rho0, beta0) = path.eval(0.0).unwrap();
        assert_eq!(rho0.amax(), 0.0);
        assert_eq!(beta0.amax(), 0.0);
        // At t = 1 (inside the second piece): rho = (1, 1/3 + 1/3 * 1/2) and
        // beta = (3, 0). Hand integration of d rho/dt = (y - beta)/2.
        let (rho, beta) = path.eval(1.0).unwrap();
        assert!((rho[0] - 1.0).abs() < 1e-12);
        assert!((rho[1] - 0.5).abs() < 1e-12);
        assert!((beta[0] - 3.0).abs() < 1e-12);
        assert_eq!(beta[1], 0.0);
        // Exactly at a breakpoint the stored values come back.
        let (rho_bk, _) = path.eval(path.breakpoints()[1]).unwrap();
        assert_eq!(rho_bk, path.rho_at_breakpoints()[1]);
    }

    #[test]
    fn mean_path_is_exact_piecewise_integration() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        // mean(2) = (1/2) * 3 * (2 - 2/3) in coordinate 0; coordinate 1 has
        // not accumulated anything on [0, 2).
        let mean = path.mean(2.0).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-12);
        assert!(mean[1].abs() < 1e-15);
        // Before the first breakpoint the mean vanishes.
        let mean_early = path.mean(0.5).unwrap();
        assert_eq!(mean_early.amax(), 0.0);
        // Step function: beta = c after t1 gives mean c (t - t1) / t.
        let t1 = path.breakpoints()[1];
        let t = 1.5;
        let mean_mid = path.mean(t).unwrap();
        assert!((mean_mid[0] - 3.0 * (t - t1) / t).abs() < 1e-12);
        assert!(path.mean(0.0).is_err());
    }

    #[test]
    fn incremental_on_identity_design() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        assert!(path.is_incremental(10.0));
    }

    #[test]
    fn truncation_by_breakpoint_cap() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(
            &p,
            &IssOptions {
                max_breakpoints: 1,
                ..IssOptions::default()
            },
        )
        .unwrap();
        assert!(path.truncated());
        assert_eq!(path.breakpoints().len(), 2);
        assert!(path.eval(path.domain_end()).is_ok());
        match path.eval(path.domain_end() + 0.5) {
            Err(Error::OutOfDomain { .. }) => {}
            other => panic!("expected out-of-domain, got {other:?}"),
        }
    }

    #[test]
    fn t_max_cuts_the_domain() {
        let p = identity_problem(&[3.0, 1.0]);
        let path = iss_path(
            &p,
            &IssOptions {
                t_max: 1.0,
                ..IssOptions::default()
            },
        )
        .unwrap();
        assert_eq!(path.end(), PathEnd::ReachedTMax);
        // Second breakpoint (t = 2) was never computed.
        assert_eq!(path.breakpoints().len(), 2);
        assert!(path.eval(1.0).is_ok());
        assert!(path.eval(1.1).is_err());
    }

    #[test]
    fn dual_feasibility_along_the_path() {
        let x = crate::testutil::gaussian_matrix(10, 6, 31);
        let y = crate::testutil::gaussian_vector(10, 32) * 2.0;
        let p = Problem::new(x, y).unwrap();
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        let t_end = *path.breakpoints().last().unwrap();
        let samples = 200;
        for k in 0..=samples {
            let t = t_end * k as f64 / samples as f64;
            let (rho, _) = path.eval(t).unwrap();
            assert!(rho.amax() <= 1.0 + 1e-9, "rho out of the unit ball at t = {t}");
        }
    }

    #[test]
    fn residual_nonincreasing_across_pieces() {
        let x = crate::testutil::gaussian_matrix(10, 6, 33);
        let y = crate::testutil::gaussian_vector(10, 34) * 2.0;
        let p = Problem::new(x, y).unwrap();
        let path = iss_path(&p, &IssOptions::default()).unwrap();
        let mut last = f64::INFINITY;
        for beta in path.beta_on_pieces() {
            let r = p.residual(beta).norm();
            assert!(r <= last + 1e-9, "residual grew: {r} > {last}");
            last = r;
        }
    }

    #[test]
    fn fit_invariant_under_column_permutation() {
        let x = crate::testutil::gaussian_matrix(12, 7, 35);
        let y = crate::testutil::gaussian_vector(12, 36);
        let p = Problem::new(x.clone(), y.clone()).unwrap();
        let path = iss_path(&p, &IssOptions::default()).unwrap();

        let perm: Vec<usize> = vec![3, 0, 6, 1, 5, 2, 4];
        let xp = x.select_columns(perm.iter());
        let pp = Problem::new(xp, y).unwrap();
        let path_p = iss_path(&pp, &IssOptions::default()).unwrap();

        assert_eq!(path.breakpoints().len(), path_p.breakpoints().len());
        for (k, (&t, &tp)) in path
            .breakpoints()
            .iter()
            .zip(path_p.breakpoints())
            .enumerate()
        {
            assert!((t - tp).abs() < 1e-8, "breakpoint {k} differs");
            let fit = p.x() * &path.beta_on_pieces()[k];
            let fit_p = pp.x() * &path_p.beta_on_pieces()[k];
            assert!((fit - fit_p).amax() < 1e-8, "fit differs on piece {k}");
        }
    }
}
