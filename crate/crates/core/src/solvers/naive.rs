//! Textbook FCM over an explicit `c × n` membership matrix.
//!
//! Memberships use the ratio form `u_ik = 1 / Σ_j (d_ik / d_jk)^(2/(m−1))`,
//! which costs `O(c²)` per point and shares no code with the term kernel used
//! by the fast solvers.

use super::{check_problem, max_shift, FcmParams, SolveResult};
use crate::error::Result;
use crate::numeric::sq_dist;
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

pub fn fcm_naive<T: Scalar>(
    points: PointsRef<'_, T>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<SolveResult<T>> {
    fcm_naive_traced(points, init, params).map(|(r, _)| r)
}

/// Like [`fcm_naive`], also returning the objective at the initial centers
/// and after every center update (`iterations + 1` values).
pub fn fcm_naive_traced<T: Scalar>(
    points: PointsRef<'_, T>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<(SolveResult<T>, Vec<T>)> {
    check_problem(points, init, params)?;
    let c = params.c;
    let n = points.len();
    let dim = points.dim();
    let m = params.m;

    let mut centers = init.clone();
    let mut u = vec![T::zero(); c * n];
    let mut trace = Vec::new();
    let mut weights = vec![T::zero(); c];
    let mut iterations = 0;
    let mut shift = T::infinity();
    let mut objective = T::zero();

    while iterations < params.max_iterations {
        fill_memberships(points, &centers, m, &mut u);
        objective = objective_from(points, &centers, m, &u);
        trace.push(objective);

        let mut next = CenterSet::zeros(c, dim);
        for i in 0..c {
            let row = &u[i * n..(i + 1) * n];
            let mut mass = T::zero();
            let acc = next.row_mut(i);
            for (k, x) in points.rows().enumerate() {
                let w = row[k].powf(m);
                mass += w;
                for (a, &v) in acc.iter_mut().zip(x) {
                    *a += w * v;
                }
            }
            weights[i] = mass;
            if mass > T::zero() {
                for a in acc.iter_mut() {
                    *a /= mass;
                }
            } else {
                acc.copy_from_slice(centers.row(i));
            }
        }
        shift = max_shift(&centers, &next)?;
        centers = next;
        iterations += 1;
        if shift <= params.epsilon {
            break;
        }
    }
    fill_memberships(points, &centers, m, &mut u);
    trace.push(objective_from(points, &centers, m, &u));

    Ok((
        SolveResult {
            centers,
            weights,
            iterations,
            converged: shift <= params.epsilon,
            final_shift: shift,
            objective,
        },
        trace,
    ))
}

fn fill_memberships<T: Scalar>(
    points: PointsRef<'_, T>,
    centers: &CenterSet<T>,
    m: T,
    u: &mut [T],
) {
    let c = centers.len();
    let n = points.len();
    let exponent = T::one() / (m - T::one());
    let mut d = vec![T::zero(); c];
    for (k, x) in points.rows().enumerate() {
        for (di, v) in d.iter_mut().zip(centers.rows()) {
            *di = sq_dist(x, v);
        }
        let zeros = d.iter().filter(|&&v| v == T::zero()).count();
        for i in 0..c {
            u[i * n + k] = if zeros > 0 {
                if d[i] == T::zero() {
                    T::one() / T::of_usize(zeros)
                } else {
                    T::zero()
                }
            } else {
                let mut s = T::zero();
                for j in 0..c {
                    s += (d[i] / d[j]).powf(exponent);
                }
                T::one() / s
            };
        }
    }
}

fn objective_from<T: Scalar>(points: PointsRef<'_, T>, centers: &CenterSet<T>, m: T, u: &[T]) -> T {
    let n = points.len();
    let mut q = T::zero();
    for (i, v) in centers.rows().enumerate() {
        for (k, x) in points.rows().enumerate() {
            q += u[i * n + k].powf(m) * sq_dist(x, v);
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Points;

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        let init = Points::from_rows(&[[0.7]]).unwrap();
        let p = FcmParams::new(1).with_epsilon(1e-12);
        let r = fcm_naive(pts.view(), &init, &p).unwrap();
        assert!((r.centers.row(0)[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[0] - 2.0).abs() < 1e-15);
        assert!(r.converged);
    }

    #[test]
    fn two_tight_pairs_regression() {
        let pts = Points::from_rows(&[[0.0], [0.1], [1.9], [2.0]]).unwrap();
        let init = Points::from_rows(&[[0.2], [1.8]]).unwrap();
        let p = FcmParams::new(2).with_epsilon(1e-12);
        let r = fcm_naive(pts.view(), &init, &p).unwrap();
        let (a, b) = (r.centers.row(0)[0], r.centers.row(1)[0]);
        assert!((a - 0.05).abs() <= 0.02, "{a}");
        assert!((b - 1.95).abs() <= 0.02, "{b}");
        // fixture recorded from this oracle; symmetric problem
        assert!((a + b - 2.0).abs() < 1e-9);
        assert!((a - 0.049_997_26).abs() < 1e-7, "{a}");
    }

    #[test]
    fn fixed_point_takes_one_iteration() {
        let pts = Points::from_rows(&[[0.0, 1.0], [3.0, 4.0], [7.0, -1.0]]).unwrap();
        let p = FcmParams::new(3).with_epsilon(1e-12);
        let r = fcm_naive(pts.view(), &pts, &p).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.centers, pts);
    }

    #[test]
    fn rejects_too_few_points_and_non_finite() {
        let pts = Points::from_rows(&[[0.0]]).unwrap();
        let init = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(fcm_naive(pts.view(), &init, &FcmParams::new(2)).is_err());

        let pts = Points::from_rows(&[[0.0], [f64::NAN]]).unwrap();
        let init = Points::from_rows(&[[0.0]]).unwrap();
        assert!(fcm_naive(pts.view(), &init, &FcmParams::new(1)).is_err());
    }
}
