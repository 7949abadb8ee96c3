//! Distance, membership-term and objective kernels shared by all solvers.
//!
//! A *membership term* is `u_i^m`: the m-powered membership of a point in
//! cluster `i`. The accumulation-form solvers never need `u_i` itself, only
//! these terms, which is what keeps an FCM pass at `O(c)` work per point.

use crate::error::{FcmError, Result};
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// `Σ_j (a_j − b_j)²`.
pub fn squared_euclidean<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(FcmError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(sq_dist(a, b))
}

#[inline]
pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

pub(crate) fn check_fuzzifier<T: Scalar>(m: T) -> Result<()> {
    if !(m > T::one()) || !m.is_finite() {
        return Err(FcmError::param(format!(
            "fuzzifier m must be a finite value > 1, got {m}"
        )));
    }
    Ok(())
}

/// Membership terms `u_i^m` of `x` against every center.
///
/// When `x` coincides with `k ≥ 1` centers the full membership is split
/// equally among them, giving `(1/k)^m` for those centers and 0 elsewhere.
pub fn membership_terms<T: Scalar>(x: &[T], centers: &CenterSet<T>, m: T) -> Result<Vec<T>> {
    check_fuzzifier(m)?;
    if centers.is_empty() {
        return Err(FcmError::invalid("center set is empty"));
    }
    if x.len() != centers.dim() {
        return Err(FcmError::DimensionMismatch {
            left: x.len(),
            right: centers.dim(),
        });
    }
    let mut kernel = TermKernel::new(m, centers.len());
    kernel.compute(x, centers.view());
    Ok(kernel.terms().to_vec())
}

/// Reusable scratch for computing membership terms one point at a time.
///
/// Holds `O(c)` state: squared distances and terms for the current point.
#[derive(Debug, Clone)]
pub(crate) struct TermKernel<T> {
    m: T,
    neg_m: T,
    inv_m_minus_one: T,
    sq: Vec<T>,
    terms: Vec<T>,
}

impl<T: Scalar> TermKernel<T> {
    pub(crate) fn new(m: T, clusters: usize) -> Self {
        TermKernel {
            m,
            neg_m: -m,
            inv_m_minus_one: T::one() / (m - T::one()),
            sq: vec![T::zero(); clusters],
            terms: vec![T::zero(); clusters],
        }
    }

    pub(crate) fn terms(&self) -> &[T] {
        &self.terms
    }

    pub(crate) fn sq_distances(&self) -> &[T] {
        &self.sq
    }

    /// Fills the term buffer for `x`. Caller guarantees matching dimensions
    /// and `centers.len() == clusters`.
    pub(crate) fn compute(&mut self, x: &[T], centers: PointsRef<'_, T>) {
        let mut sq_min = T::infinity();
        let mut coincident = 0usize;
        for (s, c) in self.sq.iter_mut().zip(centers.rows()) {
            *s = sq_dist(x, c);
            if *s == T::zero() {
                coincident += 1;
            }
            if *s < sq_min {
                sq_min = *s;
            }
        }

        if coincident > 0 {
            let share = (T::one() / T::of_usize(coincident)).powf(self.m);
            for (t, &s) in self.terms.iter_mut().zip(&self.sq) {
                *t = if s == T::zero() { share } else { T::zero() };
            }
            return;
        }

        // numerator_i = ||x - v_i||^(2/(m-1)), taken relative to the nearest
        // center. The common factor cancels in numerator_i * denominator and
        // keeps the exponent chain away from overflow and underflow.
        let mut denominator = T::zero();
        for (t, &s) in self.terms.iter_mut().zip(&self.sq) {
            let numerator = (s / sq_min).pow_real(self.inv_m_minus_one);
            *t = numerator;
            denominator += T::one() / numerator;
        }
        for t in self.terms.iter_mut() {
            *t = (*t * denominator).pow_real(self.neg_m);
        }
    }
}

/// Weighted FCM objective `Q = Σ_i Σ_k w_k u_ik^m ||x_k − v_i||²`.
///
/// With all weights equal to one this is the plain FCM objective.
pub fn fcm_objective<T: Scalar>(
    points: PointsRef<'_, T>,
    weights: &[T],
    centers: &CenterSet<T>,
    m: T,
) -> Result<T> {
    check_fuzzifier(m)?;
    if weights.len() != points.len() {
        return Err(FcmError::invalid(format!(
            "{} weights for {} points",
            weights.len(),
            points.len()
        )));
    }
    if let Some(w) = weights
        .iter()
        .find(|w| !(**w > T::zero()) || !w.is_finite())
    {
        return Err(FcmError::invalid(format!(
            "weights must be positive, got {w}"
        )));
    }
    if centers.is_empty() {
        return Err(FcmError::invalid("center set is empty"));
    }
    if points.dim() != centers.dim() {
        return Err(FcmError::DimensionMismatch {
            left: points.dim(),
            right: centers.dim(),
        });
    }
    let mut kernel = TermKernel::new(m, centers.len());
    let mut q = T::zero();
    for (x, &w) in points.rows().zip(weights) {
        kernel.compute(x, centers.view());
        let mut inner = T::zero();
        for (&t, &s) in kernel.terms().iter().zip(kernel.sq_distances()) {
            inner += t * s;
        }
        q += w * inner;
    }
    Ok(q)
}

/// Unweighted objective, the unit-weight special case of [`fcm_objective`].
pub fn fcm_objective_unweighted<T: Scalar>(
    points: PointsRef<'_, T>,
    centers: &CenterSet<T>,
    m: T,
) -> Result<T> {
    let ones = vec![T::one(); points.len()];
    fcm_objective(points, &ones, centers, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Points;

    fn centers(rows: &[&[f64]]) -> CenterSet<f64> {
        Points::from_rows(rows).unwrap()
    }

    #[test]
    fn squared_euclidean_examples() {
        assert_eq!(squared_euclidean(&[0.0], &[0.0]).unwrap(), 0.0);
        assert_eq!(squared_euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(
            squared_euclidean(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.5]).unwrap(),
            0.25
        );
    }

    #[test]
    fn squared_euclidean_rejects_mismatch() {
        let err = squared_euclidean(&[1.0, 2.0], &[1.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn membership_terms_examples() {
        let cs = centers(&[&[0.0], &[2.0]]);
        // textbook memberships for x = 0.5: d = (0.5, 1.5), u0 = 1 / (1 + 1/9) = 0.9
        let t = membership_terms(&[0.5], &cs, 2.0).unwrap();
        assert!((t[0] - 0.81).abs() < 1e-12, "{t:?}");
        assert!((t[1] - 0.01).abs() < 1e-12, "{t:?}");

        assert_eq!(membership_terms(&[0.0], &cs, 2.0).unwrap(), vec![1.0, 0.0]);

        let t = membership_terms(&[1.0], &cs, 2.0).unwrap();
        assert!((t[0] - 0.25).abs() < 1e-15 && (t[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn coincident_centers_share_membership() {
        let cs = centers(&[&[1.0], &[1.0], &[4.0]]);
        let t = membership_terms(&[1.0], &cs, 3.0).unwrap();
        assert_eq!(t, vec![0.125, 0.125, 0.0]);
    }

    #[test]
    fn membership_rejects_bad_fuzzifier() {
        let cs = centers(&[&[0.0]]);
        assert!(matches!(
            membership_terms(&[1.0], &cs, 1.0),
            Err(FcmError::Parameter(_))
        ));
        assert!(membership_terms(&[1.0], &cs, 0.5).is_err());
        assert!(membership_terms(&[1.0], &cs, f64::NAN).is_err());
    }

    #[test]
    fn far_centers_do_not_overflow() {
        let cs = centers(&[&[0.0], &[1e150]]);
        let t = membership_terms(&[1e-150], &cs, 1.2).unwrap();
        assert_eq!(t[0], 1.0);
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn objective_examples() {
        let pts = Points::from_rows(&[[0.0], [2.0]]).unwrap();
        let cs = centers(&[&[0.0], &[2.0]]);
        assert_eq!(
            fcm_objective(pts.view(), &[1.0, 1.0], &cs, 2.0).unwrap(),
            0.0
        );

        let pts = Points::from_rows(&[[1.0]]).unwrap();
        let cs = centers(&[&[0.0]]);
        assert_eq!(fcm_objective(pts.view(), &[1.0], &cs, 2.0).unwrap(), 1.0);

        let pts = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        let cs = centers(&[&[0.5]]);
        assert_eq!(
            fcm_objective(pts.view(), &[1.0, 1.0], &cs, 2.0).unwrap(),
            0.5
        );
    }

    #[test]
    fn objective_rejects_nonpositive_weight() {
        let pts = Points::from_rows(&[[0.0], [1.0]]).unwrap();
        let cs = centers(&[&[0.5]]);
        assert!(fcm_objective(pts.view(), &[1.0, 0.0], &cs, 2.0).is_err());
        assert!(fcm_objective(pts.view(), &[1.0, -2.0], &cs, 2.0).is_err());
        assert!(fcm_objective(pts.view(), &[1.0], &cs, 2.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let cs = crate::points::Points::<f32>::from_rows(&[[0.0f32], [2.0]]).unwrap();
        let t = membership_terms(&[0.5f32], &cs, 2.0).unwrap();
        assert!((t[0] - 0.81).abs() < 1e-5);
    }
}
