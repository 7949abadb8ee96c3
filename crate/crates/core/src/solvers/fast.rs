//! Accumulation-form FCM.
//!
//! Each pass streams the points once. For every point the membership terms
//! are computed against the current centers and immediately folded into
//! per-cluster sums `V_i += t_i·w·x` and masses `W_i += t_i·w`; finalization
//! divides `V_i / W_i`. Nothing per point survives the pass.

use super::{check_problem, max_shift, FcmParams, SolveResult};
use crate::error::{FcmError, Result};
use crate::numeric::{sq_dist, TermKernel};
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// FCM with unit weights.
pub fn fcm_fast<T: Scalar>(
    points: PointsRef<'_, T>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<SolveResult<T>> {
    check_problem(points, init, params)?;
    solve(points, None, init, params)
}

/// Weighted FCM: point `k` contributes with mass `weights[k] > 0`.
///
/// Output weights are `W_i = Σ_k u_ik^m · w_k`. With every weight equal to
/// one the result is bit-identical to [`fcm_fast`].
pub fn wfcm<T: Scalar>(
    points: PointsRef<'_, T>,
    weights: &[T],
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<SolveResult<T>> {
    check_problem(points, init, params)?;
    if weights.len() != points.len() {
        return Err(FcmError::invalid(format!(
            "{} weights for {} points",
            weights.len(),
            points.len()
        )));
    }
    if let Some((k, w)) = weights
        .iter()
        .enumerate()
        .find(|(_, w)| !(**w > T::zero()) || !w.is_finite())
    {
        return Err(FcmError::invalid(format!(
            "weight of point {k} must be positive, got {w}"
        )));
    }
    solve(points, Some(weights), init, params)
}

struct Accumulator<T> {
    sums: Vec<T>,
    mass: Vec<T>,
    objective: T,
}

fn solve<T: Scalar>(
    points: PointsRef<'_, T>,
    weights: Option<&[T]>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<SolveResult<T>> {
    let c = params.c;
    let dim = points.dim();
    let mut kernel = TermKernel::new(params.m, c);
    let mut acc = Accumulator {
        sums: vec![T::zero(); c * dim],
        mass: vec![T::zero(); c],
        objective: T::zero(),
    };

    let mut centers = init.clone();
    let mut iterations = 0;
    let mut shift = T::infinity();

    while iterations < params.max_iterations {
        accumulate(points, weights, &centers, &mut kernel, &mut acc);

        // A starved cluster is moved onto the worst-covered point and the
        // pass is redone. Bounded by c moves per iteration.
        let mut reseeds = 0;
        while reseeds < c {
            let Some(empty) = acc.mass.iter().position(|&w| w == T::zero()) else {
                break;
            };
            match farthest_point(points, &centers) {
                Some(k) => {
                    centers.row_mut(empty).copy_from_slice(points.row(k));
                    reseeds += 1;
                    accumulate(points, weights, &centers, &mut kernel, &mut acc);
                }
                None => break,
            }
        }

        let mut next = centers.clone();
        for i in 0..c {
            let w = acc.mass[i];
            if w > T::zero() {
                let row = next.row_mut(i);
                for (v, &s) in row.iter_mut().zip(&acc.sums[i * dim..(i + 1) * dim]) {
                    *v = s / w;
                }
            }
        }
        shift = max_shift(&centers, &next)?;
        centers = next;
        iterations += 1;
        if shift <= params.epsilon {
            break;
        }
    }

    Ok(SolveResult {
        centers,
        weights: acc.mass,
        iterations,
        converged: shift <= params.epsilon,
        final_shift: shift,
        objective: acc.objective,
    })
}

fn accumulate<T: Scalar>(
    points: PointsRef<'_, T>,
    weights: Option<&[T]>,
    centers: &CenterSet<T>,
    kernel: &mut TermKernel<T>,
    acc: &mut Accumulator<T>,
) {
    let dim = points.dim();
    acc.sums.iter_mut().for_each(|s| *s = T::zero());
    acc.mass.iter_mut().for_each(|s| *s = T::zero());
    acc.objective = T::zero();
    for (k, x) in points.rows().enumerate() {
        kernel.compute(x, centers.view());
        let terms = kernel.terms();
        let sq = kernel.sq_distances();
        for i in 0..terms.len() {
            let t = match weights {
                Some(w) => terms[i] * w[k],
                None => terms[i],
            };
            if t == T::zero() {
                continue;
            }
            acc.mass[i] += t;
            acc.objective += t * sq[i];
            for (s, &v) in acc.sums[i * dim..(i + 1) * dim].iter_mut().zip(x) {
                *s += t * v;
            }
        }
    }
}

/// Index of the point farthest from its nearest center; `None` when every
/// point sits on a center.
fn farthest_point<T: Scalar>(points: PointsRef<'_, T>, centers: &CenterSet<T>) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, x) in points.rows().enumerate() {
        let nearest = centers
            .rows()
            .map(|v| sq_dist(x, v))
            .fold(T::infinity(), T::min);
        if nearest > T::zero() && best.is_none_or(|(_, b)| nearest > b) {
            best = Some((k, nearest));
        }
    }
    best.map(|(k, _)| k)
}
