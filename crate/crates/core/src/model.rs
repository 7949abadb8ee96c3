//! On-disk model file: centers, weights, stage report and the configuration
//! that produced them, as TOML.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FcmError, Result};
use crate::pipeline::ClusterModel;
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample: f64,
    pub driver: f64,
    pub combine: f64,
    pub reduce: f64,
    pub evaluate: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageIterations {
    pub driver: usize,
    pub combiners: Vec<usize>,
    pub reduce: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub clusters: usize,
    pub dim: usize,
    pub flag: u8,
    pub objective: f64,
    pub validation_size: usize,
    pub partitions: usize,
    pub sample_size: usize,
    pub block_size: usize,
    pub hierarchical: bool,
    /// Driver race timings in seconds.
    pub t_wfcmpb: f64,
    pub t_fcm: f64,
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub timings_ms: StageTimings,
    pub iterations: StageIterations,
    /// Effective configuration, defaults resolved.
    pub config: BTreeMap<String, String>,
}

impl ModelFile {
    pub fn from_model(model: &ClusterModel<f64>, config: BTreeMap<String, String>) -> Self {
        let r = &model.report;
        ModelFile {
            clusters: model.centers.len(),
            dim: model.centers.dim(),
            flag: r.flag.map_or(1, |f| f.bit()),
            objective: model.objective,
            validation_size: model.validation_size,
            partitions: r.partition_count,
            sample_size: r.sample_size,
            block_size: r.block_size,
            hierarchical: r.hierarchical,
            t_wfcmpb: r.t_wfcmpb,
            t_fcm: r.t_fcm,
            centers: model.centers.to_rows(),
            weights: model.weights.clone(),
            timings_ms: StageTimings {
                sample: r.sample_ms,
                driver: r.driver_ms,
                combine: r.combine_ms,
                reduce: r.reduce_ms,
                evaluate: r.evaluate_ms,
                total: r.total_ms,
            },
            iterations: StageIterations {
                driver: r.driver_iterations,
                combiners: r.combiner_iterations.clone(),
                reduce: r.reduce_iterations,
            },
            config,
        }
    }

    pub fn centers(&self) -> Result<Points<f64>> {
        let pts = Points::from_rows(&self.centers)?;
        if pts.len() != self.clusters || pts.dim() != self.dim {
            return Err(FcmError::Format(format!(
                "header says {}x{} but centers are {}x{}",
                self.clusters,
                self.dim,
                pts.len(),
                pts.dim()
            )));
        }
        Ok(pts)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FcmError::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| FcmError::Format(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FcmError::io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }
}

/// The `centers = ...` line of a serialized model file.
pub fn center_block(text: &str) -> Option<&str> {
    text.lines().find(|l| l.starts_with("centers ="))
}
