//! Sample sizing for the driver stage and one-pass uniform record sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FcmError, Result};

/// Error level for which a coefficient ships by default.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Tabulated multinomial coefficient for `α = 0.05`.
pub const V_ALPHA_005: f64 = 1.27359;
/// Relative class-proportion difference used when none is configured.
pub const DEFAULT_RELATIVE_DIFFERENCE: f64 = 0.10;

/// Lookup of tabulated `v(α)` coefficients. Only tabulated error levels are
/// accepted; further entries can be registered from configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct VAlphaTable {
    entries: Vec<(f64, f64)>,
}

impl Default for VAlphaTable {
    fn default() -> Self {
        VAlphaTable {
            entries: vec![(DEFAULT_ALPHA, V_ALPHA_005)],
        }
    }
}

impl VAlphaTable {
    pub fn insert(&mut self, alpha: f64, v_alpha: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(FcmError::param(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        if !(v_alpha > 0.0) || !v_alpha.is_finite() {
            return Err(FcmError::param(format!(
                "v(alpha) must be positive, got {v_alpha}"
            )));
        }
        match self.entries.iter_mut().find(|(a, _)| same_alpha(*a, alpha)) {
            Some(entry) => entry.1 = v_alpha,
            None => self.entries.push((alpha, v_alpha)),
        }
        self.entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(())
    }

    pub fn lookup(&self, alpha: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|(a, _)| same_alpha(*a, alpha))
            .map(|&(_, v)| v)
            .ok_or_else(|| FcmError::Unsupported {
                name: "alpha",
                value: alpha.to_string(),
                supported: self.supported(),
            })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    fn supported(&self) -> String {
        self.entries
            .iter()
            .map(|(a, _)| a.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn same_alpha(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Snaps values within a few ulps of an integer before rounding up, so that
/// e.g. `9 / 0.1²` does not become 901 through representation error.
fn ceil_count(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// `λ = ⌈v(α)·c² / r²⌉`.
pub fn parker_hall_size(v_alpha: f64, clusters: usize, relative_difference: f64) -> Result<usize> {
    if !(v_alpha > 0.0) || !v_alpha.is_finite() {
        return Err(FcmError::invalid(format!(
            "v(alpha) must be positive, got {v_alpha}"
        )));
    }
    if clusters == 0 {
        return Err(FcmError::invalid("cluster count must be at least 1"));
    }
    if !(relative_difference > 0.0 && relative_difference <= 1.0) {
        return Err(FcmError::invalid(format!(
            "relative difference must lie in (0, 1], got {relative_difference}"
        )));
    }
    let c = clusters as f64;
    Ok(ceil_count(
        v_alpha * c * c / (relative_difference * relative_difference),
    ))
}

/// Worst-case multinomial bound `⌈v(α)/d²⌉` using the tabulated `v(α)`.
pub fn thompson_size(table: &VAlphaTable, alpha: f64, d: f64) -> Result<usize> {
    let v = table.lookup(alpha)?;
    if !(d > 0.0 && d < 1.0) {
        return Err(FcmError::invalid(format!(
            "absolute proportion difference d must lie in (0, 1), got {d}"
        )));
    }
    Ok(ceil_count(v / (d * d)))
}

/// Resolved driver sample sizing.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub alpha: f64,
    pub v_alpha: f64,
    pub clusters: usize,
    pub relative_difference: f64,
    pub resolved_size: usize,
}

impl SampleSpec {
    /// Sizes the driver sample for `clusters` clusters over `n` records,
    /// clamped to `[10·clusters, n]`.
    pub fn resolve(
        table: &VAlphaTable,
        alpha: f64,
        relative_difference: f64,
        clusters: usize,
        n: usize,
    ) -> Result<Self> {
        let v_alpha = table.lookup(alpha)?;
        let raw = parker_hall_size(v_alpha, clusters, relative_difference)?;
        Ok(SampleSpec {
            alpha,
            v_alpha,
            clusters,
            relative_difference,
            resolved_size: raw.max(clusters * 10).min(n),
        })
    }
}

/// Uniform sample without replacement of `min(k, n)` items in one pass.
///
/// When the stream holds at most `k` items they are all returned in stream
/// order. Output is deterministic for a given seed and stream order.
pub fn reservoir_sample<I>(stream: I, k: usize, seed: u64) -> Result<Vec<I::Item>>
where
    I: IntoIterator,
{
    Ok(reservoir_sample_indexed(stream, k, seed)?
        .into_iter()
        .map(|(_, item)| item)
        .collect())
}

/// Like [`reservoir_sample`], also returning each item's stream position.
pub fn reservoir_sample_indexed<I>(stream: I, k: usize, seed: u64) -> Result<Vec<(usize, I::Item)>>
where
    I: IntoIterator,
{
    if k == 0 {
        return Err(FcmError::invalid("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reservoir: Vec<(usize, I::Item)> = Vec::with_capacity(k);
    for (seen, item) in stream.into_iter().enumerate() {
        if seen < k {
            reservoir.push((seen, item));
        } else {
            let j = rng.random_range(0..=seen);
            if j < k {
                reservoir[j] = (seen, item);
            }
        }
    }
    if reservoir.is_empty() {
        return Err(FcmError::invalid("cannot sample from an empty stream"));
    }
    Ok(reservoir)
}
