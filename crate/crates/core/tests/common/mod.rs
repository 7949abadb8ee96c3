#![allow(dead_code)]

use bigfcm::synthetic::GaussianMixture;
use bigfcm::{CenterSet, Points};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smallest over all center bijections of the largest coordinate gap.
/// Brute force over permutations; fine for a handful of centers.
pub fn aligned_gap(a: &CenterSet, b: &CenterSet) -> f64 {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.dim(), b.dim());
    let mut perm: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let gap = p
            .iter()
            .enumerate()
            .flat_map(|(i, &j)| a.row(i).iter().zip(b.row(j)).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        best = best.min(gap);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// Random problem: `n` points in `[-10, 10]^d` and `c` distinct points as init.
pub fn random_instance(seed: u64, n: usize, c: usize, d: usize) -> (Points, CenterSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.random_range(-10.0..10.0)).collect();
    let points = Points::new(data, d).unwrap();
    let picks = rand::seq::index::sample(&mut rng, n, c);
    let mut init = CenterSet::with_dim(d);
    for i in picks {
        init.push(points.row(i)).unwrap();
    }
    (points, init)
}

/// The four-corner mixture used by the pipeline checks.
pub fn four_corners(n: usize, seed: u64) -> (Points, Vec<usize>, CenterSet) {
    let g = GaussianMixture::four_corners();
    let (points, labels) = g.sample(n, seed);
    (points, labels, g.means_as_points())
}

pub fn four_corners_with_sigma(n: usize, sigma: f64, seed: u64) -> Points {
    let mut g = GaussianMixture::four_corners();
    g.sigma = sigma;
    g.sample(n, seed).0
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        (v[k / 2 - 1] + v[k / 2]) / 2.0
    }
}
