use rand::seq::index;
use rand::Rng;

use crate::error::{FcmError, Result};
use crate::numeric::sq_dist;
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// `c` distinct records chosen uniformly at random.
pub fn seed_uniform<T: Scalar, R: Rng + ?Sized>(
    points: PointsRef<'_, T>,
    c: usize,
    rng: &mut R,
) -> Result<CenterSet<T>> {
    check(points, c)?;
    let mut picked = index::sample(rng, points.len(), c).into_vec();
    picked.sort_unstable();
    let mut out = CenterSet::with_dim(points.dim());
    for i in picked {
        out.push(points.row(i))?;
    }
    Ok(out)
}

/// D²-weighted seeding: the first center is uniform, every further center is
/// drawn with probability proportional to its squared distance from the
/// nearest center chosen so far.
pub fn seed_plus_plus<T: Scalar, R: Rng + ?Sized>(
    points: PointsRef<'_, T>,
    c: usize,
    rng: &mut R,
) -> Result<CenterSet<T>> {
    check(points, c)?;
    let n = points.len();
    let mut out = CenterSet::with_dim(points.dim());
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    out.push(points.row(first))?;

    let mut nearest: Vec<f64> = points
        .rows()
        .map(|x| sq_dist(x, points.row(first)).as_f64())
        .collect();

    while out.len() < c {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 && total.is_finite() {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
            pick.expect("positive total implies a positive entry")
        } else {
            // Every remaining record duplicates a chosen center.
            (0..n).find(|&i| !chosen[i]).expect("n >= c")
        };
        chosen[next] = true;
        out.push(points.row(next))?;
        let center = points.row(next);
        for (d, x) in nearest.iter_mut().zip(points.rows()) {
            let s = sq_dist(x, center).as_f64();
            if s < *d {
                *d = s;
            }
        }
    }
    Ok(out)
}

fn check<T: Scalar>(points: PointsRef<'_, T>, c: usize) -> Result<()> {
    if c == 0 {
        return Err(FcmError::param("cannot seed zero centers"));
    }
    if points.len() < c {
        return Err(FcmError::invalid(format!(
            "{} records cannot seed {c} centers",
            points.len()
        )));
    }
    Ok(())
}
