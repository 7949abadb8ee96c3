//! Block-progressive weighted FCM.
//!
//! The input is cut into consecutive blocks. Block `i` is clustered with
//! [`fcm_fast`] starting from block `i−1`'s centers, and its weighted centers
//! are merged with the running result by [`wfcm`]. The running result is
//! re-reduced to `c` centers after every block, so the merge pool never holds
//! more than `2c` weighted centers.

use std::ops::Range;

use super::{check_problem, fcm_fast, wfcm, FcmParams, SolveResult};
use crate::error::{FcmError, Result};
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// Consecutive block ranges over `n` records. A trailing block with fewer
/// than `min_len` records is folded into its predecessor.
pub fn split_blocks(n: usize, block_size: usize, min_len: usize) -> Vec<Range<usize>> {
    let mut blocks: Vec<Range<usize>> = (0..n)
        .step_by(block_size.max(1))
        .map(|start| start..(start + block_size).min(n))
        .collect();
    if blocks.len() > 1 && blocks.last().is_some_and(|b| b.len() < min_len) {
        let tail = blocks.pop().expect("len > 1");
        blocks.last_mut().expect("len > 0").end = tail.end;
    }
    blocks
}

pub fn wfcmpb<T: Scalar>(
    points: PointsRef<'_, T>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
    block_size: usize,
) -> Result<SolveResult<T>> {
    if block_size < params.c {
        return Err(FcmError::invalid(format!(
            "block size {block_size} is smaller than the cluster count {}",
            params.c
        )));
    }
    if points.is_empty() {
        return Err(FcmError::invalid("no points to cluster"));
    }
    check_problem(points, init, params)?;

    let mut seeds = init.clone();
    let mut merged: Option<SolveResult<T>> = None;
    let mut iterations = 0;

    for range in split_blocks(points.len(), block_size, params.c) {
        let block = fcm_fast(points.slice(range), &seeds, params)?;
        iterations += block.iterations;

        let mut pool = CenterSet::with_dim(points.dim());
        let mut pool_weights = Vec::with_capacity(2 * params.c);
        let sources = merged
            .iter()
            .map(|r| (&r.centers, &r.weights))
            .chain(std::iter::once((&block.centers, &block.weights)));
        for (centers, weights) in sources {
            for (row, &w) in centers.rows().zip(weights) {
                if w > T::zero() {
                    pool.push(row)?;
                    pool_weights.push(w);
                }
            }
        }
        if pool.len() < params.c {
            return Err(FcmError::Degenerate(format!(
                "only {} weighted centers with positive mass, need {}",
                pool.len(),
                params.c
            )));
        }

        let merge_init = merged.as_ref().map_or(&block.centers, |r| &r.centers);
        let next = wfcm(pool.view(), &pool_weights, merge_init, params)?;
        iterations += next.iterations;
        seeds = block.centers;
        merged = Some(next);
    }

    let mut out = merged.expect("at least one block");
    out.iterations = iterations;
    Ok(out)
}
