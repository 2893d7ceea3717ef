//! Column-sharded Linearized Bregman iteration: each shard owns a contiguous
//! block of columns, updates its slice of z against the shared fit
//! `w_k = X beta_k`, and the per-shard fits `w_{k+1,l} = X_l beta_{k+1,l}`
//! are fused by a fixed pairwise-tree all-reduce. The fusion moves `n`-vectors
//! only, so per-iteration communication is independent of p.

use std::ops::Range;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lb::{LbOptions, LbRecord, LbTrace, StoppingReason};
use crate::model::Problem;

/// Contiguous, covering, disjoint column ranges, one per shard.
#[derive(Debug, Clone)]
pub struct ShardPlan {
    ranges: Vec<Range<usize>>,
}

impl ShardPlan {
    /// Splits `[0, p)` into `shards` contiguous ranges of near-equal width.
    pub fn contiguous(p: usize, shards: usize) -> Result<Self> {
        if shards == 0 || shards > p {
            return Err(Error::ShardPlan(format!(
                "need 1 <= shards <= p, got {shards} shards for p = {p}"
            )));
        }
        let base = p / shards;
        let extra = p % shards;
        let mut ranges = Vec::with_capacity(shards);
        let mut start = 0;
        for l in 0..shards {
            let width = base + usize::from(l < extra);
            ranges.push(start..start + width);
            start += width;
        }
        Ok(Self { ranges })
    }

    pub fn shard_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    fn validate_for(&self, p: usize) -> Result<()> {
        let mut expected = 0usize;
        for r in &self.ranges {
            if r.start != expected || r.end < r.start {
                return Err(Error::ShardPlan(format!(
                    "ranges must be contiguous and ordered, got {r:?} after {expected}"
                )));
            }
            expected = r.end;
        }
        if expected != p {
            return Err(Error::ShardPlan(format!(
                "ranges cover [0, {expected}) but p = {p}"
            )));
        }
        Ok(())
    }
}

/// Fixed pairwise tree reduction in ascending shard order: (0+1), (2+3), ...
/// level by level. Freezing the association makes the floating-point sum
/// deterministic regardless of how shards were scheduled.
fn tree_reduce(mut level: Vec<DVector<f64>>) -> DVector<f64> {
    debug_assert!(!level.is_empty());
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut iter = level.drain(..);
        while let Some(first) = iter.next() {
            match iter.next() {
                Some(second) => next.push(first + second),
                None => next.push(first),
            }
        }
        drop(iter);
        level = next;
    }
    level.pop().unwrap()
}

/// Runs `iters` sharded LB iterations, recording every iterate. With one
/// shard the arithmetic is identical to [`crate::lb::lb_run`]; with more, the
/// fits agree with the serial run up to reordered summation.
pub fn lb_sharded(
    problem: &Problem,
    plan: &ShardPlan,
    kappa: f64,
    alpha: f64,
    iters: usize,
) -> Result<LbTrace> {
    if !(kappa > 0.0) || !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!(
            "lb_sharded needs kappa > 0 and alpha > 0, got kappa = {kappa}, alpha = {alpha}"
        )));
    }
    plan.validate_for(problem.p())?;
    let p = problem.p();
    let n = problem.n() as f64;
    let scale = alpha / n;
    let l = plan.shard_count();

    let opnorm = problem.gram_n().symmetric_eigen().eigenvalues.max();
    let step_bound_violated = kappa * alpha * opnorm >= 2.0;

    let mut z = DVector::<f64>::zeros(p);
    let mut beta = DVector::<f64>::zeros(p);
    let mut first_entry: Vec<Option<(usize, f64)>> = vec![None; p];
    let mut records = Vec::with_capacity(iters + 1);

    for k in 0..=iters {
        records.push(LbRecord {
            k,
            t: k as f64 * alpha,
            z: z.clone(),
            beta: beta.clone(),
        });
        if k == iters {
            break;
        }

        // Per-shard fits w_l = X_l beta_l, then the tree all-reduce. Shards
        // may run on independent worker threads between the barriers; the
        // ordered collect keeps the reduction input in shard order.
        let fits: Vec<DVector<f64>> = if l == 1 {
            let r = plan.ranges()[0].clone();
            vec![problem.x().columns(r.start, r.len()) * beta.rows(r.start, r.len())]
        } else {
            plan.ranges()
                .par_iter()
                .map(|r| problem.x().columns(r.start, r.len()) * beta.rows(r.start, r.len()))
                .collect()
        };
        let w = tree_reduce(fits);
        let residual = problem.y() - w;

        // Per-shard dual updates touch disjoint slices of z.
        let updates: Vec<DVector<f64>> = if l == 1 {
            let r = plan.ranges()[0].clone();
            vec![problem
                .x()
                .columns(r.start, r.len())
                .tr_mul(&residual)]
        } else {
            plan.ranges()
                .par_iter()
                .map(|r| problem.x().columns(r.start, r.len()).tr_mul(&residual))
                .collect()
        };
        for (r, g) in plan.ranges().iter().zip(&updates) {
            z.rows_mut(r.start, r.len()).axpy(scale, g, 1.0);
        }

        let k_next = k + 1;
        let t_next = k_next as f64 * alpha;
        let mut worst = 0.0_f64;
        for i in 0..p {
            beta[i] = kappa * crate::model::shrink_scalar(z[i], 1.0);
            worst = worst.max(z[i].abs());
            if beta[i] != 0.0 && first_entry[i].is_none() {
                first_entry[i] = Some((k_next, t_next));
            }
        }
        if !worst.is_finite() || worst > crate::lb::DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                iter: k_next,
                observed: kappa * alpha * opnorm,
            });
        }
    }

    Ok(LbTrace {
        kappa,
        alpha,
        records,
        stopping_reason: StoppingReason::MaxIters,
        step_bound_violated,
        first_entry,
    })
}

/// Communication model of the all-reduce: each iteration moves `n (L - 1)`
/// floats through the pairwise tree, independent of p.
pub fn communication_cost(plan: &ShardPlan, n: usize) -> usize {
    n * (plan.shard_count() - 1)
}

/// Runs the serial iteration with [`crate::lb::lb_run`] semantics for exactly
/// `iters` steps recording every iterate, as the sharded contract's reference.
pub fn lb_serial_reference(
    problem: &Problem,
    kappa: f64,
    alpha: f64,
    iters: usize,
) -> Result<LbTrace> {
    crate::lb::lb_run(
        problem,
        kappa,
        alpha,
        &LbOptions {
            max_iters: iters,
            t_max: f64::INFINITY,
            record_stride: 1,
            stop_rule: None,
        },
    )
}
