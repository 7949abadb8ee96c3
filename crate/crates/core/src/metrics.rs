//! Evaluation metrics: hardened assignments, confusion-matrix accuracy,
//! silhouette width and relative speedup.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FcmError, Result};
use crate::numeric::sq_dist;
use crate::points::{CenterSet, PointsRef};
use crate::scalar::Scalar;

/// Default number of points scored by [`silhouette_width`].
pub const DEFAULT_SILHOUETTE_CAP: usize = 4000;

/// Index of the nearest center for every point; ties go to the lowest index.
///
/// This is the argmax of the membership for any fuzzifier, since memberships
/// decrease monotonically with distance.
pub fn assign<T: Scalar>(points: PointsRef<'_, T>, centers: &CenterSet<T>) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(FcmError::invalid("center set is empty"));
    }
    if points.dim() != centers.dim() {
        return Err(FcmError::DimensionMismatch {
            left: points.dim(),
            right: centers.dim(),
        });
    }
    Ok(points
        .rows()
        .map(|x| {
            let mut best = 0;
            let mut best_d = T::infinity();
            for (i, c) in centers.rows().enumerate() {
                let d = sq_dist(x, c);
                if d < best_d {
                    best = i;
                    best_d = d;
                }
            }
            best
        })
        .collect())
}

/// Accuracy under the best cluster → label mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion<L> {
    pub accuracy: f64,
    pub matched: usize,
    pub total: usize,
    /// Label assigned to each cluster that holds at least one record.
    pub mapping: BTreeMap<usize, L>,
}

/// Builds the cluster × label table and maximizes the matched count.
///
/// With no more clusters than labels the mapping is a one-to-one assignment
/// solved exactly (Kuhn–Munkres). With more clusters than labels labels may
/// repeat, and each cluster independently takes its majority label, which is
/// then optimal.
pub fn confusion_accuracy<L: Ord + Clone>(
    assignments: &[usize],
    labels: &[L],
) -> Result<Confusion<L>> {
    if assignments.len() != labels.len() {
        return Err(FcmError::invalid(format!(
            "{} assignments for {} labels",
            assignments.len(),
            labels.len()
        )));
    }
    if assignments.is_empty() {
        return Err(FcmError::invalid("no records to evaluate"));
    }

    let label_set: Vec<L> = {
        let mut v = labels.to_vec();
        v.sort();
        v.dedup();
        v
    };
    let mut clusters: Vec<usize> = assignments.to_vec();
    clusters.sort_unstable();
    clusters.dedup();

    let mut table = vec![vec![0i64; label_set.len()]; clusters.len()];
    for (a, l) in assignments.iter().zip(labels) {
        let r = clusters.binary_search(a).expect("present");
        let c = label_set.binary_search(l).expect("present");
        table[r][c] += 1;
    }

    let choice: Vec<usize> = if clusters.len() <= label_set.len() {
        let m = Matrix::from_rows(table.iter().cloned()).expect("rectangular table");
        kuhn_munkres(&m).1
    } else {
        table
            .iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    };

    let matched: i64 = choice.iter().enumerate().map(|(r, &c)| table[r][c]).sum();
    let mapping = clusters
        .iter()
        .zip(&choice)
        .map(|(&k, &c)| (k, label_set[c].clone()))
        .collect();
    Ok(Confusion {
        accuracy: matched as f64 / assignments.len() as f64,
        matched: matched as usize,
        total: assignments.len(),
        mapping,
    })
}

/// Mean silhouette width with the number of points it was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Silhouette {
    pub value: f64,
    pub sample_size: usize,
}

/// Mean silhouette width `(b − a)/max(a, b)` under Euclidean distance.
///
/// Points in singleton clusters score 0. When there are more than
/// `sample_cap` points a seeded uniform subset of `sample_cap` points is
/// scored against itself.
pub fn silhouette_width<T: Scalar>(
    points: PointsRef<'_, T>,
    assignments: &[usize],
    sample_cap: usize,
    seed: u64,
) -> Result<Silhouette> {
    if points.len() != assignments.len() {
        return Err(FcmError::invalid(format!(
            "{} assignments for {} points",
            assignments.len(),
            points.len()
        )));
    }
    if points.len() < 2 {
        return Err(FcmError::UndefinedMetric(
            "silhouette needs at least 2 points".into(),
        ));
    }
    if sample_cap < 2 {
        return Err(FcmError::param("silhouette sample cap must be at least 2"));
    }

    let chosen: Vec<usize> = if points.len() > sample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, points.len(), sample_cap).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..points.len()).collect()
    };

    let labels: Vec<usize> = {
        let mut v: Vec<usize> = chosen.iter().map(|&i| assignments[i]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if labels.len() < 2 {
        return Err(FcmError::UndefinedMetric(
            "silhouette needs at least 2 non-empty clusters".into(),
        ));
    }
    let slot: Vec<usize> = chosen
        .iter()
        .map(|&i| labels.binary_search(&assignments[i]).expect("present"))
        .collect();
    let mut sizes = vec![0usize; labels.len()];
    for &s in &slot {
        sizes[s] += 1;
    }

    let scores: Vec<f64> = chosen
        .par_iter()
        .zip(slot.par_iter())
        .map(|(&i, &own)| {
            if sizes[own] == 1 {
                return 0.0;
            }
            let x = points.row(i);
            let mut sums = vec![0.0f64; labels.len()];
            for (&j, &s) in chosen.iter().zip(&slot) {
                if j != i {
                    sums[s] += sq_dist(x, points.row(j)).as_f64().sqrt();
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = sums
                .iter()
                .zip(&sizes)
                .enumerate()
                .filter(|(k, _)| *k != own)
                .map(|(_, (s, &n))| s / n as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom > 0.0 {
                (b - a) / denom
            } else {
                0.0
            }
        })
        .collect();

    Ok(Silhouette {
        value: scores.iter().sum::<f64>() / scores.len() as f64,
        sample_size: scores.len(),
    })
}

/// `t_baseline / t_candidate`.
pub fn relative_speedup(t_baseline: f64, t_candidate: f64) -> Result<f64> {
    if !(t_baseline > 0.0 && t_baseline.is_finite())
        || !(t_candidate > 0.0 && t_candidate.is_finite())
    {
        return Err(FcmError::invalid(format!(
            "times must be positive, got {t_baseline} and {t_candidate}"
        )));
    }
    Ok(t_baseline / t_candidate)
}

/// Evaluation summary.
#[derive(Debug, Clone, Default, Serialize)]
pub struct EvalReport {
    pub accuracy: Option<f64>,
    /// `cluster → label` pairs used for `accuracy`.
    pub mapping: Vec<(usize, String)>,
    pub silhouette: Option<Silhouette>,
    /// Named wall-clock figures in milliseconds.
    pub runtimes_ms: BTreeMap<String, f64>,
    pub speedup: Option<f64>,
    /// Effective configuration, one entry per setting.
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn to_toml(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            #[serde(skip_serializing_if = "Option::is_none")]
            accuracy: Option<f64>,
            mapping: BTreeMap<String, &'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            silhouette: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            silhouette_sample_size: Option<usize>,
            #[serde(skip_serializing_if = "Option::is_none")]
            speedup: Option<f64>,
            runtimes_ms: &'a BTreeMap<String, f64>,
            config: &'a BTreeMap<String, String>,
        }
        let doc = Doc {
            accuracy: self.accuracy,
            mapping: self
                .mapping
                .iter()
                .map(|(k, l)| (k.to_string(), l.as_str()))
                .collect(),
            silhouette: self.silhouette.map(|s| s.value),
            silhouette_sample_size: self.silhouette.map(|s| s.sample_size),
            speedup: self.speedup,
            runtimes_ms: &self.runtimes_ms,
            config: &self.config,
        };
        toml::to_string(&doc).map_err(|e| FcmError::Format(e.to_string()))
    }

    /// Two-column aligned table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = Vec::new();
        if let Some(a) = self.accuracy {
            rows.push(("accuracy".into(), format!("{a:.4}")));
            let mapping = self
                .mapping
                .iter()
                .map(|(k, l)| format!("{k}->{l}"))
                .collect::<Vec<_>>()
                .join(" ");
            rows.push(("mapping".into(), mapping));
        }
        if let Some(s) = self.silhouette {
            rows.push((
                "silhouette".into(),
                format!("{:.4} (n={})", s.value, s.sample_size),
            ));
        }
        for (name, ms) in &self.runtimes_ms {
            rows.push((format!("{name} ms"), format!("{ms:.1}")));
        }
        if let Some(s) = self.speedup {
            rows.push(("speedup".into(), format!("{s:.3}")));
        }
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
