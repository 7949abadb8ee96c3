//! Scalable fuzzy c-means.
//!
//! The engine clusters a dataset in three stages: a driver clusters a random
//! sample to produce seed centers, per-partition combiners cluster their
//! slice of the data in parallel and emit weighted centers, and a reducer
//! merges the weighted centers with weighted FCM.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the pipeline and CLI use.

pub mod cli;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod points;
pub mod sampling;
pub mod scalar;
pub mod solvers;
pub mod synthetic;

pub use error::{FcmError, Result, Stage};
pub use scalar::Scalar;

/// Point set in double precision.
pub type Points = points::Points<f64>;
/// Borrowed point set in double precision.
pub type PointsRef<'a> = points::PointsRef<'a, f64>;
/// Center set in double precision.
pub type CenterSet = points::CenterSet<f64>;
/// Solver parameters in double precision.
pub type FcmParams = solvers::FcmParams<f64>;
/// Solver output in double precision.
pub type SolveResult = solvers::SolveResult<f64>;
/// Pipeline configuration in double precision.
pub type PipelineConfig = pipeline::PipelineConfig<f64>;
/// Pipeline output in double precision.
pub type ClusterModel = pipeline::ClusterModel<f64>;

/// Single-precision aliases.
pub type Points32 = points::Points<f32>;
pub type FcmParams32 = solvers::FcmParams<f32>;
