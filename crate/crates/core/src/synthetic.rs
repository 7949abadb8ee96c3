//! Seeded Gaussian-mixture data for tests and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FcmError, Result};
use crate::points::Points;

/// Isotropic Gaussian components with a shared standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub sigma: f64,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let dim = means.first().map_or(0, Vec::len);
        if dim == 0 || means.iter().any(|m| m.len() != dim) {
            return Err(FcmError::invalid(
                "means must be non-empty with equal dimension",
            ));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(FcmError::param(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        Ok(GaussianMixture { means, sigma })
    }

    /// Four 2-D components at the corners of a 10 × 10 square, σ = 0.1.
    pub fn four_corners() -> Self {
        GaussianMixture {
            means: vec![
                vec![0.0, 0.0],
                vec![10.0, 0.0],
                vec![0.0, 10.0],
                vec![10.0, 10.0],
            ],
            sigma: 0.1,
        }
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn means_as_points(&self) -> Points<f64> {
        Points::from_rows(&self.means).expect("validated shape")
    }

    /// `n` points with component chosen uniformly at random; returns the
    /// points and each point's component index.
    pub fn sample(&self, n: usize, seed: u64) -> (Points<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, self.sigma).expect("validated sigma");
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let k = rng.random_range(0..self.means.len());
            labels.push(k);
            data.extend(self.means[k].iter().map(|&m| m + noise.sample(&mut rng)));
        }
        (Points::new(data, dim).expect("whole rows"), labels)
    }
}
