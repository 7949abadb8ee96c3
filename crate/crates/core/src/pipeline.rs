//! The three-stage pipeline.
//!
//! 1. **Driver**: clusters a reservoir sample with both [`wfcmpb`] and
//!    [`fcm_fast`], times the two, and publishes the centers of the faster
//!    one as read-only seeds (ties go to `wfcmpb`).
//! 2. **Combiners**: one per partition, run concurrently on a worker pool.
//!    Each clusters its slice into `c_intermediate` weighted centers.
//! 3. **Reducer**: pools the weighted centers in partition order and runs
//!    [`wfcm`] down to `c`. With many partitions the pool is first reduced in
//!    groups.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FcmError, Result, Stage};
use crate::ingest::plan_partitions;
use crate::numeric::fcm_objective_unweighted;
use crate::points::{CenterSet, Points, PointsRef};
use crate::sampling::{
    parker_hall_size, reservoir_sample, SampleSpec, VAlphaTable, DEFAULT_ALPHA,
    DEFAULT_RELATIVE_DIFFERENCE,
};
use crate::scalar::Scalar;
use crate::solvers::{
    fcm_fast, seed_plus_plus, seed_uniform, wfcm, wfcmpb, FcmParams, SolveResult, DEFAULT_EPSILON,
};

/// Default number of groups for hierarchical reduction.
pub const DEFAULT_REDUCE_GROUPS: usize = 4;
/// Driver epsilon is the reducer epsilon divided by this unless set.
pub const DRIVER_EPSILON_DIVISOR: f64 = 100.0;

/// Derives an independent seed for one pipeline stage from the run seed.
pub fn stage_seed(seed: u64, stage: Stage) -> u64 {
    let tag = stage as u64 + 1;
    seed.wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Time source for the driver's solver race.
pub trait Clock: Sync {
    /// Elapsed time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

/// Wall clock backed by [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl Default for MonotonicClock {
    fn default() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Replays fixed readings in order, repeating the last one when exhausted.
#[derive(Debug)]
pub struct ScriptedClock {
    readings: Mutex<VecDeque<Duration>>,
    last: Mutex<Duration>,
}

impl ScriptedClock {
    pub fn from_secs(readings: &[f64]) -> Self {
        ScriptedClock {
            readings: Mutex::new(
                readings
                    .iter()
                    .map(|&s| Duration::from_secs_f64(s))
                    .collect(),
            ),
            last: Mutex::new(Duration::ZERO),
        }
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> Duration {
        let mut last = self.last.lock().expect("clock lock");
        if let Some(next) = self.readings.lock().expect("clock lock").pop_front() {
            *last = next;
        }
        *last
    }
}

/// Solver the combiners run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    /// Flag 0: block-progressive weighted FCM.
    Wfcmpb = 0,
    /// Flag 1: accumulation-form FCM.
    Fcm = 1,
}

impl Flag {
    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(Flag::Wfcmpb),
            1 => Ok(Flag::Fcm),
            other => Err(FcmError::param(format!("flag must be 0 or 1, got {other}"))),
        }
    }
}

/// Outcome of the driver stage.
#[derive(Debug, Clone)]
pub struct DriverDecision<T> {
    pub flag: Flag,
    /// Read-only seeds shared by every combiner.
    pub seed_centers: Arc<CenterSet<T>>,
    /// Seconds spent by `wfcmpb` on the sample.
    pub t_wfcmpb: f64,
    /// Seconds spent by `fcm_fast` on the sample.
    pub t_fcm: f64,
    pub sample_size: usize,
    /// Iterations of the solver whose centers were published.
    pub iterations: usize,
}

/// Clusters the sample with both solvers from the same D² seeds and keeps
/// the `fcm_fast` centers (flag 1) iff `wfcmpb` took strictly longer.
pub fn run_driver<T: Scalar>(
    sample: PointsRef<'_, T>,
    params: &FcmParams<T>,
    driver_epsilon: T,
    block_size: usize,
    clock: &dyn Clock,
) -> Result<DriverDecision<T>> {
    let p = params.intermediate().with_epsilon(driver_epsilon);
    p.validate()?;
    if sample.len() < p.c {
        return Err(FcmError::invalid(format!(
            "driver sample of {} records is smaller than c_intermediate = {}",
            sample.len(),
            p.c
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(params.seed, Stage::Driver));
    let init = seed_plus_plus(sample, p.c, &mut rng)?;

    let start = clock.now();
    let progressive = wfcmpb(sample, &init, &p, block_size.max(p.c))?;
    let t_wfcmpb = clock.now().saturating_sub(start).as_secs_f64();
    let start = clock.now();
    let fast = fcm_fast(sample, &init, &p)?;
    let t_fcm = clock.now().saturating_sub(start).as_secs_f64();

    let (flag, chosen) = if t_wfcmpb - t_fcm > 0.0 {
        (Flag::Fcm, fast)
    } else {
        (Flag::Wfcmpb, progressive)
    };
    Ok(DriverDecision {
        flag,
        seed_centers: Arc::new(chosen.centers),
        t_wfcmpb,
        t_fcm,
        sample_size: sample.len(),
        iterations: chosen.iterations,
    })
}

/// Weighted centers produced by one partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerOutput<T> {
    pub source_partition: usize,
    pub centers: CenterSet<T>,
    pub weights: Vec<T>,
    pub iterations: usize,
}

/// How a combiner obtains its starting centers.
#[derive(Debug, Clone)]
pub enum CombinerSeeds<T> {
    /// Shared driver seeds, solver chosen by the flag.
    Driver(Arc<CenterSet<T>>, Flag),
    /// Uniformly drawn records of the partition, solved with `fcm_fast`.
    Random(u64),
}

/// Clusters one partition into `params.c_intermediate` weighted centers.
///
/// A partition with fewer records than `c_intermediate` is passed through:
/// every record becomes a center of weight 1.
pub fn run_combiner<T: Scalar>(
    partition: PointsRef<'_, T>,
    index: usize,
    seeds: &CombinerSeeds<T>,
    params: &FcmParams<T>,
    block_size: usize,
) -> Result<CombinerOutput<T>> {
    if partition.is_empty() {
        return Err(FcmError::invalid("partition is empty"));
    }
    let p = params.intermediate();
    if let CombinerSeeds::Driver(centers, _) = seeds {
        if centers.dim() != partition.dim() {
            return Err(FcmError::DimensionMismatch {
                left: partition.dim(),
                right: centers.dim(),
            });
        }
    }
    if partition.len() < p.c {
        return Ok(CombinerOutput {
            source_partition: index,
            centers: partition.to_owned(),
            weights: vec![T::one(); partition.len()],
            iterations: 0,
        });
    }
    let result = match seeds {
        CombinerSeeds::Driver(centers, Flag::Fcm) => fcm_fast(partition, centers, &p)?,
        CombinerSeeds::Driver(centers, Flag::Wfcmpb) => {
            wfcmpb(partition, centers, &p, block_size.max(p.c))?
        }
        CombinerSeeds::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            let init = seed_uniform(partition, p.c, &mut rng)?;
            fcm_fast(partition, &init, &p)?
        }
    };
    Ok(CombinerOutput {
        source_partition: index,
        centers: result.centers,
        weights: result.weights,
        iterations: result.iterations,
    })
}

/// Pools weighted centers in the given order, drops zero weights and runs
/// weighted FCM to `params.c` centers seeded by the first `c` pooled ones.
pub fn run_reducer<T: Scalar>(
    outputs: &[CombinerOutput<T>],
    params: &FcmParams<T>,
) -> Result<SolveResult<T>> {
    let Some(first) = outputs.first() else {
        return Err(FcmError::invalid("no combiner outputs to reduce"));
    };
    let (pool, weights) = pool_outputs(outputs, first.centers.dim())?;
    if pool.len() < params.c {
        return Err(FcmError::Degenerate(format!(
            "{} pooled centers with positive weight, need {}",
            pool.len(),
            params.c
        )));
    }
    let init = pool.view().slice(0..params.c).to_owned();
    wfcm(pool.view(), &weights, &init, params)
}

fn pool_outputs<T: Scalar>(
    outputs: &[CombinerOutput<T>],
    dim: usize,
) -> Result<(Points<T>, Vec<T>)> {
    let mut pool = Points::with_dim(dim);
    let mut weights = Vec::new();
    for out in outputs {
        if out.centers.dim() != dim {
            return Err(FcmError::DimensionMismatch {
                left: dim,
                right: out.centers.dim(),
            });
        }
        for (row, &w) in out.centers.rows().zip(&out.weights) {
            if w > T::zero() {
                pool.push(row)?;
                weights.push(w);
            }
        }
    }
    Ok((pool, weights))
}

/// How the driver sample size is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSizing {
    /// Parker–Hall size for `c_intermediate` clusters.
    Auto {
        alpha: f64,
        relative_difference: f64,
    },
    Fixed(usize),
}

impl Default for SampleSizing {
    fn default() -> Self {
        SampleSizing::Auto {
            alpha: DEFAULT_ALPHA,
            relative_difference: DEFAULT_RELATIVE_DIFFERENCE,
        }
    }
}

/// Where combiner seeds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seeding {
    Driver,
    /// No driver; every combiner draws its own random records. Baseline for
    /// measuring what driver seeding buys.
    Random,
}

/// Order in which combiner outputs reach the reducer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOrder {
    /// Partition-index order; results are reproducible.
    Deterministic,
    /// Completion order; center values may differ between runs.
    FreeOrder,
}

/// Full pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig<T> {
    /// `epsilon` here is the reducer epsilon.
    pub params: FcmParams<T>,
    /// Defaults to the reducer epsilon / 100.
    pub driver_epsilon: Option<T>,
    /// Defaults to [`DEFAULT_EPSILON`], independent of the reducer epsilon.
    pub combiner_epsilon: Option<T>,
    pub partitions: usize,
    pub parallelism: usize,
    pub sample: SampleSizing,
    pub v_table: VAlphaTable,
    /// Block length for `wfcmpb`. Defaults to the driver sample size given
    /// by the sampling formula.
    pub block_size: Option<usize>,
    pub seeding: Seeding,
    /// Overrides the driver's timing decision.
    pub force_flag: Option<Flag>,
    pub reduce_groups: usize,
    pub order: ReduceOrder,
}

impl<T: Scalar> PipelineConfig<T> {
    pub fn new(params: FcmParams<T>) -> Self {
        PipelineConfig {
            params,
            driver_epsilon: None,
            combiner_epsilon: None,
            partitions: 1,
            parallelism: 1,
            sample: SampleSizing::default(),
            v_table: VAlphaTable::default(),
            block_size: None,
            seeding: Seeding::Driver,
            force_flag: None,
            reduce_groups: DEFAULT_REDUCE_GROUPS,
            order: ReduceOrder::Deterministic,
        }
    }

    pub fn with_partitions(mut self, partitions: usize, parallelism: usize) -> Self {
        self.partitions = partitions;
        self.parallelism = parallelism;
        self
    }

    pub fn driver_epsilon(&self) -> T {
        self.driver_epsilon
            .unwrap_or(self.params.epsilon / T::of(DRIVER_EPSILON_DIVISOR))
    }

    pub fn combiner_epsilon(&self) -> T {
        self.combiner_epsilon.unwrap_or(T::of(DEFAULT_EPSILON))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (name, eps) in [
            ("driver epsilon", self.driver_epsilon()),
            ("combiner epsilon", self.combiner_epsilon()),
        ] {
            if !(eps > T::zero()) || !eps.is_finite() {
                return Err(FcmError::param(format!(
                    "{name} must be positive, got {eps}"
                )));
            }
        }
        if self.partitions == 0 {
            return Err(FcmError::param("partition count must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(FcmError::param("parallelism must be at least 1"));
        }
        if self.reduce_groups == 0 {
            return Err(FcmError::param("reduce groups must be at least 1"));
        }
        if let SampleSizing::Fixed(0) = self.sample {
            return Err(FcmError::param("sample size must be at least 1"));
        }
        Ok(())
    }

    fn resolve_sample_size(&self, n: usize) -> Result<usize> {
        match self.sample {
            SampleSizing::Fixed(k) => Ok(k.min(n)),
            SampleSizing::Auto {
                alpha,
                relative_difference,
            } => Ok(SampleSpec::resolve(
                &self.v_table,
                alpha,
                relative_difference,
                self.params.c_intermediate,
                n,
            )?
            .resolved_size),
        }
    }

    /// Block length: the configured value, else the sampling-formula size
    /// before clamping to the dataset.
    fn resolve_block_size(&self) -> Result<usize> {
        let size = match (self.block_size, &self.sample) {
            (Some(b), _) => b,
            (None, SampleSizing::Fixed(k)) => *k,
            (
                None,
                SampleSizing::Auto {
                    alpha,
                    relative_difference,
                },
            ) => parker_hall_size(
                self.v_table.lookup(*alpha)?,
                self.params.c_intermediate,
                *relative_difference,
            )?,
        };
        Ok(size.max(self.params.c_intermediate))
    }
}

/// Per-stage accounting for one run. Times are milliseconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageReport {
    pub sample_ms: f64,
    pub driver_ms: f64,
    pub combine_ms: f64,
    pub reduce_ms: f64,
    pub evaluate_ms: f64,
    pub total_ms: f64,
    pub sample_size: usize,
    pub block_size: usize,
    pub driver_iterations: usize,
    /// Driver race timings in seconds; zero when the driver did not run.
    pub t_wfcmpb: f64,
    pub t_fcm: f64,
    /// Iterations per partition, in partition order.
    pub combiner_iterations: Vec<usize>,
    pub reduce_iterations: usize,
    pub partition_count: usize,
    pub hierarchical: bool,
    pub flag: Option<Flag>,
}

impl StageReport {
    pub fn total_combiner_iterations(&self) -> usize {
        self.combiner_iterations.iter().sum()
    }
}

/// Final result of [`run_bigfcm`].
#[derive(Debug, Clone)]
pub struct ClusterModel<T> {
    pub centers: CenterSet<T>,
    pub weights: Vec<T>,
    /// Unweighted objective over a validation sample.
    pub objective: T,
    pub validation_size: usize,
    pub report: StageReport,
}

/// Runs the whole pipeline on an in-memory dataset.
pub fn run_bigfcm<T: Scalar>(
    data: PointsRef<'_, T>,
    config: &PipelineConfig<T>,
    cancel: Option<&AtomicBool>,
) -> Result<ClusterModel<T>> {
    run_bigfcm_with_clock(data, config, cancel, &MonotonicClock::default())
}

/// [`run_bigfcm`] with an injected clock for the driver's timing decision.
pub fn run_bigfcm_with_clock<T: Scalar>(
    data: PointsRef<'_, T>,
    config: &PipelineConfig<T>,
    cancel: Option<&AtomicBool>,
    clock: &dyn Clock,
) -> Result<ClusterModel<T>> {
    let total = Instant::now();
    config.validate()?;
    if data.is_empty() {
        return Err(FcmError::invalid("dataset is empty").at(Stage::Ingest));
    }
    data.check_finite().map_err(|e| e.at(Stage::Ingest))?;
    let cancelled = || cancel.is_some_and(|c| c.load(Ordering::Relaxed));
    let check_cancel = || {
        if cancelled() {
            Err(FcmError::Cancelled)
        } else {
            Ok(())
        }
    };
    let params = config.params;
    let seed = params.seed;
    let mut report = StageReport::default();

    // Sample
    let t = Instant::now();
    let sample_size = config
        .resolve_sample_size(data.len())
        .map_err(|e| e.at(Stage::Sample))?;
    let sample = gather(data, sample_size, stage_seed(seed, Stage::Sample))
        .map_err(|e| e.at(Stage::Sample))?;
    let block_size = config
        .resolve_block_size()
        .map_err(|e| e.at(Stage::Sample))?;
    report.sample_ms = ms(t);
    report.sample_size = sample.len();
    report.block_size = block_size;
    log::info!(
        "sample: {} of {} records in {:.1} ms",
        sample.len(),
        data.len(),
        report.sample_ms
    );
    check_cancel()?;

    // Driver
    let t = Instant::now();
    let seeds = match config.seeding {
        Seeding::Driver => {
            let decision = run_driver(
                sample.view(),
                &params,
                config.driver_epsilon(),
                block_size,
                clock,
            )
            .map_err(|e| e.at(Stage::Driver))?;
            let flag = config.force_flag.unwrap_or(decision.flag);
            report.driver_iterations = decision.iterations;
            report.t_wfcmpb = decision.t_wfcmpb;
            report.t_fcm = decision.t_fcm;
            report.flag = Some(flag);
            CombinerSeeds::Driver(decision.seed_centers, flag)
        }
        Seeding::Random => {
            report.flag = Some(Flag::Fcm);
            CombinerSeeds::Random(stage_seed(seed, Stage::Combine))
        }
    };
    report.driver_ms = ms(t);
    log::info!(
        "driver: flag {} after {} iterations in {:.1} ms",
        report.flag.map_or(1, Flag::bit),
        report.driver_iterations,
        report.driver_ms
    );
    check_cancel()?;

    // Combine
    let t = Instant::now();
    let plan = plan_partitions(data.len(), config.partitions).map_err(|e| e.at(Stage::Combine))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| FcmError::invalid(format!("worker pool: {e}")).at(Stage::Combine))?;
    let combiner_params = params.with_epsilon(config.combiner_epsilon());
    let work = |i: usize| -> Result<CombinerOutput<T>> {
        if cancelled() {
            return Err(FcmError::Cancelled);
        }
        let part = data.slice(plan.boundaries[i].clone());
        run_combiner(part, i, &seeds, &combiner_params, block_size).map_err(|e| FcmError::Worker {
            partition: i,
            source: Box::new(e),
        })
    };
    let outputs: Vec<CombinerOutput<T>> = pool
        .install(|| -> Result<Vec<_>> {
            match config.order {
                ReduceOrder::Deterministic => (0..plan.partition_count())
                    .into_par_iter()
                    .map(work)
                    .collect(),
                ReduceOrder::FreeOrder => {
                    let (tx, rx) = mpsc::channel();
                    (0..plan.partition_count())
                        .into_par_iter()
                        .for_each_with(tx, |tx, i| {
                            let _ = tx.send(work(i));
                        });
                    rx.into_iter().collect()
                }
            }
        })
        .map_err(|e| e.at(Stage::Combine))?;
    let mut by_partition: Vec<(usize, usize)> = outputs
        .iter()
        .map(|o| (o.source_partition, o.iterations))
        .collect();
    by_partition.sort_unstable();
    report.combiner_iterations = by_partition.into_iter().map(|(_, it)| it).collect();
    report.partition_count = plan.partition_count();
    report.combine_ms = ms(t);
    log::info!(
        "combine: {} partitions, {} total iterations in {:.1} ms",
        report.partition_count,
        report.total_combiner_iterations(),
        report.combine_ms
    );
    check_cancel()?;

    // Reduce
    let t = Instant::now();
    let (reduced, hierarchical, group_iterations) =
        reduce_all(outputs, &params, config.reduce_groups, &pool)
            .map_err(|e| e.at(Stage::Reduce))?;
    report.reduce_iterations = reduced.iterations + group_iterations;
    report.hierarchical = hierarchical;
    report.reduce_ms = ms(t);
    log::info!(
        "reduce: {} iterations{} in {:.1} ms",
        report.reduce_iterations,
        if hierarchical { " (hierarchical)" } else { "" },
        report.reduce_ms
    );
    check_cancel()?;

    // Evaluate
    let t = Instant::now();
    let validation = gather(data, sample_size, stage_seed(seed, Stage::Evaluate))
        .map_err(|e| e.at(Stage::Evaluate))?;
    let objective = fcm_objective_unweighted(validation.view(), &reduced.centers, params.m)
        .map_err(|e| e.at(Stage::Evaluate))?;
    report.evaluate_ms = ms(t);
    log::info!(
        "evaluate: objective {objective:e} over {} records",
        validation.len()
    );
    report.total_ms = ms(total);

    Ok(ClusterModel {
        centers: reduced.centers,
        weights: reduced.weights,
        objective,
        validation_size: validation.len(),
        report,
    })
}

/// Pools outputs, reducing in groups first when the pool is large.
fn reduce_all<T: Scalar>(
    outputs: Vec<CombinerOutput<T>>,
    params: &FcmParams<T>,
    groups: usize,
    pool: &rayon::ThreadPool,
) -> Result<(SolveResult<T>, bool, usize)> {
    let pooled: usize = outputs
        .iter()
        .map(|o| o.weights.iter().filter(|w| **w > T::zero()).count())
        .sum();
    let threshold = 10 * params.c_intermediate * groups;
    if groups < 2 || outputs.len() <= groups || pooled <= threshold {
        return Ok((run_reducer(&outputs, params)?, false, 0));
    }
    let plan = plan_partitions(outputs.len(), groups)?;
    let inter = params.intermediate();
    let merged: Vec<(CombinerOutput<T>, usize)> = pool.install(|| {
        plan.boundaries
            .par_iter()
            .enumerate()
            .map(|(g, range)| {
                let group = &outputs[range.clone()];
                let (centers, weights) = pool_outputs(group, group[0].centers.dim())?;
                if centers.len() <= inter.c {
                    let out = CombinerOutput {
                        source_partition: g,
                        centers,
                        weights,
                        iterations: 0,
                    };
                    return Ok((out, 0));
                }
                let r = run_reducer(group, &inter)?;
                let out = CombinerOutput {
                    source_partition: g,
                    centers: r.centers,
                    weights: r.weights,
                    iterations: r.iterations,
                };
                Ok((out, r.iterations))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let group_iterations = merged.iter().map(|(_, it)| it).sum();
    let level: Vec<CombinerOutput<T>> = merged.into_iter().map(|(o, _)| o).collect();
    Ok((run_reducer(&level, params)?, true, group_iterations))
}

/// Seeded uniform sample of `k` rows, in reservoir order.
fn gather<T: Scalar>(data: PointsRef<'_, T>, k: usize, seed: u64) -> Result<Points<T>> {
    let picked = reservoir_sample(data.rows(), k, seed)?;
    let mut out = Points::with_dim(data.dim());
    for row in picked {
        out.push(row)?;
    }
    Ok(out)
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}
