//! Fuzzy c-means solvers.
//!
//! * [`fcm_naive`]: textbook alternating optimization over a full
//!   membership matrix. Kept as the reference the fast paths are tested
//!   against.
//! * [`fcm_fast`]: single-pass accumulation of membership terms, no
//!   membership matrix, `O(c·d)` state.
//! * [`wfcm`]: the accumulation form with a mass attached to every point.
//! * [`wfcmpb`]: block-progressive clustering that merges weighted centers
//!   block by block.

mod fast;
mod init;
mod naive;
mod progressive;

pub use fast::{fcm_fast, wfcm};
pub use init::{seed_plus_plus, seed_uniform};
pub use naive::{fcm_naive, fcm_naive_traced};
pub use progressive::{split_blocks, wfcmpb};

use crate::error::{FcmError, Result};
use crate::numeric::{check_fuzzifier, sq_dist};
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// Default fuzzifier.
pub const DEFAULT_FUZZIFIER: f64 = 2.0;
/// Default cap on solver passes.
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;
/// Default convergence threshold on the maximum squared center shift.
pub const DEFAULT_EPSILON: f64 = 5.0e-7;

/// Solver parameters.
///
/// `c` is the number of centers a solver call produces. The pipeline clusters
/// partitions with `c_intermediate` centers and reduces to `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FcmParams<T> {
    pub c: usize,
    pub c_intermediate: usize,
    /// Fuzzifier, strictly greater than 1.
    pub m: T,
    /// Stop once the largest squared center displacement is `<= epsilon`.
    pub epsilon: T,
    pub max_iterations: usize,
    pub seed: u64,
}

impl<T: Scalar> FcmParams<T> {
    pub fn new(c: usize) -> Self {
        FcmParams {
            c,
            c_intermediate: c,
            m: T::of(DEFAULT_FUZZIFIER),
            epsilon: T::of(DEFAULT_EPSILON),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
        }
    }

    pub fn with_intermediate(mut self, c_intermediate: usize) -> Self {
        self.c_intermediate = c_intermediate;
        self
    }

    pub fn with_fuzzifier(mut self, m: T) -> Self {
        self.m = m;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same parameters with `c` replaced by the intermediate cluster count.
    pub fn intermediate(&self) -> Self {
        FcmParams {
            c: self.c_intermediate,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c == 0 {
            return Err(FcmError::param("cluster count c must be at least 1"));
        }
        if self.c_intermediate < self.c {
            return Err(FcmError::param(format!(
                "intermediate cluster count {} is smaller than c = {}",
                self.c_intermediate, self.c
            )));
        }
        check_fuzzifier(self.m)?;
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(FcmError::param(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_iterations == 0 {
            return Err(FcmError::param("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Output of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    pub centers: CenterSet<T>,
    /// Mass per center: `Σ_k w_k u_ik^m` from the final pass.
    pub weights: Vec<T>,
    /// Full passes executed.
    pub iterations: usize,
    pub converged: bool,
    /// Largest squared center displacement of the final pass.
    pub final_shift: T,
    /// Objective evaluated in the final pass, i.e. at the centers the final
    /// weights were accumulated against.
    pub objective: T,
}

/// `max_i ||new_i − old_i||² <= epsilon`.
pub fn converged<T: Scalar>(old: &CenterSet<T>, new: &CenterSet<T>, epsilon: T) -> Result<bool> {
    Ok(max_shift(old, new)? <= epsilon)
}

pub(crate) fn max_shift<T: Scalar>(old: &CenterSet<T>, new: &CenterSet<T>) -> Result<T> {
    if old.len() != new.len() || old.dim() != new.dim() {
        return Err(FcmError::invalid(format!(
            "center sets differ in shape: {}x{} vs {}x{}",
            old.len(),
            old.dim(),
            new.len(),
            new.dim()
        )));
    }
    Ok(old
        .rows()
        .zip(new.rows())
        .map(|(a, b)| sq_dist(a, b))
        .fold(T::zero(), T::max))
}

/// Shared precondition checks for every solver entry point.
pub(crate) fn check_problem<T: Scalar>(
    points: PointsRef<'_, T>,
    init: &CenterSet<T>,
    params: &FcmParams<T>,
) -> Result<()> {
    params.validate()?;
    if points.len() < params.c {
        return Err(FcmError::invalid(format!(
            "{} points cannot form {} clusters",
            points.len(),
            params.c
        )));
    }
    if init.len() != params.c {
        return Err(FcmError::invalid(format!(
            "initial center set has {} centers, expected {}",
            init.len(),
            params.c
        )));
    }
    if init.dim() != points.dim() {
        return Err(FcmError::DimensionMismatch {
            left: points.dim(),
            right: init.dim(),
        });
    }
    points.check_finite()?;
    init.view().check_finite()?;
    Ok(())
}
