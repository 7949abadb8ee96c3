//! Command implementations behind the `bigfcm` binary.
//!
//! Settings are resolved as command-line flags over a flat `key = value`
//! config file over built-in defaults. Both flags and file entries go through
//! [`RunConfig::set`], so the two sources accept exactly the same keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{FcmError, Result, Stage};
use crate::ingest::{load_dataset, load_with_preprocessing, Dataset, DatasetSchema, Preprocessing};
use crate::metrics::{
    assign, confusion_accuracy, relative_speedup, silhouette_width, EvalReport,
    DEFAULT_SILHOUETTE_CAP,
};
use crate::model::ModelFile;
use crate::numeric::fcm_objective_unweighted;
use crate::pipeline::{
    run_bigfcm, stage_seed, Flag, ReduceOrder, SampleSizing, Seeding, DEFAULT_REDUCE_GROUPS,
    DRIVER_EPSILON_DIVISOR,
};
use crate::points::{Points, PointsRef};
use crate::sampling::{
    parker_hall_size, thompson_size, VAlphaTable, DEFAULT_ALPHA, DEFAULT_RELATIVE_DIFFERENCE,
};
use crate::solvers::{
    fcm_fast, seed_uniform, FcmParams, DEFAULT_EPSILON, DEFAULT_FUZZIFIER, DEFAULT_MAX_ITERATIONS,
};
use crate::synthetic::GaussianMixture;
use crate::{ClusterModel, PipelineConfig};

/// Default partition count.
pub const DEFAULT_PARTITIONS: usize = 4;

/// Every setting a command can take.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub delimiter: char,
    pub header: bool,
    pub label_column: Option<usize>,
    pub categorical: Vec<usize>,
    pub normalize: bool,
    pub clusters: Option<usize>,
    pub intermediate_clusters: Option<usize>,
    pub fuzzifier: f64,
    pub epsilon: f64,
    pub driver_epsilon: Option<f64>,
    pub combiner_epsilon: Option<f64>,
    pub max_iter: usize,
    pub seed: u64,
    pub partitions: usize,
    pub parallelism: usize,
    pub sample_size: Option<usize>,
    pub alpha: f64,
    pub rel_diff: f64,
    pub v_alpha: VAlphaTable,
    pub block_size: Option<usize>,
    pub reduce_groups: usize,
    pub flag: Option<Flag>,
    pub seeding: Seeding,
    pub deterministic: bool,
    pub silhouette_cap: usize,
    /// Wall-clock budget for `bench`, in seconds.
    pub budget_secs: Option<f64>,
    /// `bench` data when no input is configured.
    pub synthetic: SyntheticSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: None,
            delimiter: ',',
            header: false,
            label_column: None,
            categorical: Vec::new(),
            normalize: true,
            clusters: None,
            intermediate_clusters: None,
            fuzzifier: DEFAULT_FUZZIFIER,
            epsilon: DEFAULT_EPSILON,
            driver_epsilon: None,
            combiner_epsilon: None,
            max_iter: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            partitions: DEFAULT_PARTITIONS,
            parallelism: std::thread::available_parallelism().map_or(1, usize::from),
            sample_size: None,
            alpha: DEFAULT_ALPHA,
            rel_diff: DEFAULT_RELATIVE_DIFFERENCE,
            v_alpha: VAlphaTable::default(),
            block_size: None,
            reduce_groups: DEFAULT_REDUCE_GROUPS,
            flag: None,
            seeding: Seeding::Driver,
            deterministic: true,
            silhouette_cap: DEFAULT_SILHOUETTE_CAP,
            budget_secs: None,
            synthetic: SyntheticSpec {
                n: 1_000_000,
                sigma: 0.1,
            },
        }
    }
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| FcmError::param(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(FcmError::param(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_opt<V: std::str::FromStr>(key: &str, value: &str) -> Result<Option<V>> {
    if value.eq_ignore_ascii_case("auto") || value.is_empty() {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty() && value != "none").then(|| PathBuf::from(value))
}

fn parse_delimiter(value: &str) -> Result<char> {
    match value {
        "\\t" | "tab" => Ok('\t'),
        _ => {
            let mut chars = value.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(c),
                _ => Err(FcmError::param(format!(
                    "delimiter must be a single character, got {value:?}"
                ))),
            }
        }
    }
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "input" => self.input = parse_path(value),
            "output" => self.output = parse_path(value),
            "delimiter" => self.delimiter = parse_delimiter(value)?,
            "header" => self.header = parse_bool(key, value)?,
            "label_column" => self.label_column = parse_opt(key, value)?,
            "categorical" => {
                self.categorical = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "normalize" => self.normalize = parse_bool(key, value)?,
            "clusters" => self.clusters = Some(parse(key, value)?),
            "intermediate_clusters" => self.intermediate_clusters = parse_opt(key, value)?,
            "fuzzifier" => self.fuzzifier = parse(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "driver_epsilon" => self.driver_epsilon = parse_opt(key, value)?,
            "combiner_epsilon" => self.combiner_epsilon = parse_opt(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "partitions" => self.partitions = parse(key, value)?,
            "parallelism" => self.parallelism = parse(key, value)?,
            "sample_size" => self.sample_size = parse_opt(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "rel_diff" => self.rel_diff = parse(key, value)?,
            "v_alpha" => {
                // "alpha:v, alpha:v"
                for pair in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let (a, v) = pair.split_once(':').ok_or_else(|| {
                        FcmError::param(format!("v_alpha: expected alpha:value, got {pair:?}"))
                    })?;
                    self.v_alpha
                        .insert(parse(key, a.trim())?, parse(key, v.trim())?)?;
                }
            }
            "block_size" => self.block_size = parse_opt(key, value)?,
            "reduce_groups" => self.reduce_groups = parse(key, value)?,
            "flag" => {
                self.flag = match parse_opt::<u8>(key, value)? {
                    Some(bit) => Some(Flag::from_bit(bit)?),
                    None => None,
                }
            }
            "seeding" => {
                self.seeding = match value {
                    "driver" => Seeding::Driver,
                    "random" => Seeding::Random,
                    _ => {
                        return Err(FcmError::param(format!(
                            "seeding must be driver or random, got {value:?}"
                        )))
                    }
                }
            }
            "deterministic" => self.deterministic = parse_bool(key, value)?,
            "silhouette_cap" => self.silhouette_cap = parse(key, value)?,
            "budget_secs" => self.budget_secs = parse_opt(key, value)?,
            "synthetic_n" => self.synthetic.n = parse(key, value)?,
            "synthetic_sigma" => self.synthetic.sigma = parse(key, value)?,
            _ => return Err(FcmError::param(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document. `#` starts a comment.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| FcmError::Parse {
                line: i + 1,
                column: 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| FcmError::Parse {
                    line: i + 1,
                    column: 1,
                    message: e.to_string(),
                })?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FcmError::io(path.display().to_string(), e))?;
        self.apply_config_text(&text)
    }

    /// Builds a config from defaults, an optional file, then overrides.
    pub fn resolve(config_file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_file {
            cfg.apply_config_file(path)?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn clusters(&self) -> Result<usize> {
        self.clusters
            .ok_or_else(|| FcmError::param("clusters is required"))
    }

    pub fn params(&self) -> Result<FcmParams<f64>> {
        let c = self.clusters()?;
        let p = FcmParams::new(c)
            .with_intermediate(self.intermediate_clusters.unwrap_or(c))
            .with_fuzzifier(self.fuzzifier)
            .with_epsilon(self.epsilon)
            .with_max_iterations(self.max_iter)
            .with_seed(self.seed);
        p.validate()?;
        Ok(p)
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg =
            PipelineConfig::new(self.params()?).with_partitions(self.partitions, self.parallelism);
        cfg.driver_epsilon = self.driver_epsilon;
        cfg.combiner_epsilon = self.combiner_epsilon;
        cfg.sample = match self.sample_size {
            Some(k) => SampleSizing::Fixed(k),
            None => SampleSizing::Auto {
                alpha: self.alpha,
                relative_difference: self.rel_diff,
            },
        };
        cfg.v_table = self.v_alpha.clone();
        cfg.block_size = self.block_size;
        cfg.seeding = self.seeding;
        cfg.force_flag = self.flag;
        cfg.reduce_groups = self.reduce_groups;
        cfg.order = if self.deterministic {
            ReduceOrder::Deterministic
        } else {
            ReduceOrder::FreeOrder
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            delimiter: self.delimiter,
            has_header: self.header,
            label_column: self.label_column,
            categorical_columns: self.categorical.iter().copied().collect(),
        }
    }

    /// Every setting with defaults resolved.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "none".into(), |p| p.display().to_string())
        };
        let clusters = self.clusters.unwrap_or(0);
        let eps = self.epsilon;
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("input", path(&self.input));
        put("output", path(&self.output));
        put(
            "delimiter",
            if self.delimiter == '\t' {
                "\\t".into()
            } else {
                self.delimiter.to_string()
            },
        );
        put("header", self.header.to_string());
        put(
            "label_column",
            opt(self.label_column.map(|c| c.to_string())),
        );
        put(
            "categorical",
            self.categorical
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("normalize", self.normalize.to_string());
        put("clusters", clusters.to_string());
        put(
            "intermediate_clusters",
            self.intermediate_clusters.unwrap_or(clusters).to_string(),
        );
        put("fuzzifier", self.fuzzifier.to_string());
        put("epsilon", eps.to_string());
        put(
            "driver_epsilon",
            self.driver_epsilon
                .unwrap_or(eps / DRIVER_EPSILON_DIVISOR)
                .to_string(),
        );
        put(
            "combiner_epsilon",
            self.combiner_epsilon.unwrap_or(DEFAULT_EPSILON).to_string(),
        );
        put("max_iter", self.max_iter.to_string());
        put("seed", self.seed.to_string());
        put("partitions", self.partitions.to_string());
        put("parallelism", self.parallelism.to_string());
        put("sample_size", opt(self.sample_size.map(|s| s.to_string())));
        put("alpha", self.alpha.to_string());
        put("rel_diff", self.rel_diff.to_string());
        put(
            "v_alpha",
            self.v_alpha
                .entries()
                .iter()
                .map(|(a, v)| format!("{a}:{v}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        put("block_size", opt(self.block_size.map(|b| b.to_string())));
        put("reduce_groups", self.reduce_groups.to_string());
        put("flag", opt(self.flag.map(|f| f.bit().to_string())));
        put(
            "seeding",
            match self.seeding {
                Seeding::Driver => "driver".into(),
                Seeding::Random => "random".into(),
            },
        );
        put("deterministic", self.deterministic.to_string());
        put("silhouette_cap", self.silhouette_cap.to_string());
        put("budget_secs", opt(self.budget_secs.map(|b| b.to_string())));
        put("synthetic_n", self.synthetic.n.to_string());
        put("synthetic_sigma", self.synthetic.sigma.to_string());
        m
    }

    fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| FcmError::param("input is required"))
    }
}

/// Path of the preprocessing file written next to a model file.
pub fn prep_path(model_path: &Path) -> PathBuf {
    let mut s = model_path.as_os_str().to_owned();
    s.push(".prep.toml");
    PathBuf::from(s)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FcmError::io(path.display().to_string(), e))
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text).map_err(|e| FcmError::io(tmp.display().to_string(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| FcmError::io(path.display().to_string(), e))
}

/// Reads the configured input file.
pub fn load_input(cfg: &RunConfig) -> Result<Dataset> {
    let path = cfg.input()?;
    load_dataset(open(path)?, &cfg.schema(), cfg.normalize).map_err(|e| e.at(Stage::Ingest))
}

/// Result of `cluster`.
#[derive(Debug)]
pub struct ClusterOutcome {
    pub model: ClusterModel,
    pub file: ModelFile,
    /// Serialized model file.
    pub text: String,
    pub preprocessing: Preprocessing,
}

/// Ingests the input, runs the pipeline and writes the model file (and the
/// preprocessing file next to it) when an output path is configured.
pub fn cmd_cluster(cfg: &RunConfig, cancel: Option<&AtomicBool>) -> Result<ClusterOutcome> {
    let pipeline = cfg.pipeline()?;
    let started = Instant::now();
    let dataset = load_input(cfg)?;
    let ingest_ms = started.elapsed().as_secs_f64() * 1e3;
    log::info!(
        "ingest: {} records, {} features in {ingest_ms:.1} ms",
        dataset.points.len(),
        dataset.points.dim()
    );
    let model = run_bigfcm(dataset.points.view(), &pipeline, cancel)?;
    let file = ModelFile::from_model(&model, cfg.echo());
    let text = file.to_toml()?;
    if let Some(out) = &cfg.output {
        let prep =
            toml::to_string(&dataset.preprocessing).map_err(|e| FcmError::Format(e.to_string()))?;
        write_atomic(&prep_path(out), &prep)?;
        write_atomic(out, &text)?;
    }
    Ok(ClusterOutcome {
        model,
        file,
        text,
        preprocessing: dataset.preprocessing,
    })
}

/// Scores a model against the labeled input.
///
/// When `prep` is given, the recorded encoding and normalization are replayed
/// on the input; otherwise the input is ingested fresh per `cfg`.
pub fn cmd_eval(
    model: &ModelFile,
    prep: Option<&Preprocessing>,
    cfg: &RunConfig,
) -> Result<EvalReport> {
    if cfg.label_column.is_none() {
        return Err(FcmError::param("label column required for evaluation"));
    }
    let started = Instant::now();
    let dataset = match prep {
        Some(p) => load_with_preprocessing(open(cfg.input()?)?, &cfg.schema(), p)
            .map_err(|e| e.at(Stage::Ingest))?,
        None => load_input(cfg)?,
    };
    let centers = model.centers()?;
    if centers.dim() != dataset.points.dim() {
        return Err(FcmError::invalid(format!(
            "model has d = {} but data has d = {}",
            centers.dim(),
            dataset.points.dim()
        )));
    }
    let labels = dataset
        .labels
        .as_ref()
        .ok_or_else(|| FcmError::param("label column required for evaluation"))?;
    let report = evaluate(dataset.points.view(), &centers, labels, cfg)?;
    let mut report = report;
    report
        .runtimes_ms
        .insert("cluster_total".into(), model.timings_ms.total);
    report
        .runtimes_ms
        .insert("evaluate".into(), started.elapsed().as_secs_f64() * 1e3);
    Ok(report)
}

/// Accuracy and silhouette of `centers` on labeled points.
pub fn evaluate(
    points: PointsRef<'_, f64>,
    centers: &Points<f64>,
    labels: &[String],
    cfg: &RunConfig,
) -> Result<EvalReport> {
    let at = |e: FcmError| e.at(Stage::Evaluate);
    let assignments = assign(points, centers).map_err(at)?;
    let confusion = confusion_accuracy(&assignments, labels).map_err(at)?;
    let silhouette = match silhouette_width(
        points,
        &assignments,
        cfg.silhouette_cap,
        stage_seed(cfg.seed, Stage::Evaluate),
    ) {
        Ok(s) => Some(s),
        Err(FcmError::UndefinedMetric(msg)) => {
            log::warn!("silhouette undefined: {msg}");
            None
        }
        Err(e) => return Err(at(e)),
    };
    Ok(EvalReport {
        accuracy: Some(confusion.accuracy),
        mapping: confusion.mapping.into_iter().collect(),
        silhouette,
        config: cfg.echo(),
        ..Default::default()
    })
}

/// `sample-size`: the formula instantiation and the resulting count.
///
/// With `d` given the worst-case multinomial bound is used, otherwise the
/// Parker–Hall size for `clusters` at relative difference `r`.
pub fn cmd_sample_size(
    table: &VAlphaTable,
    alpha: f64,
    clusters: usize,
    r: f64,
    d: Option<f64>,
) -> Result<(usize, String)> {
    let v = table.lookup(alpha)?;
    match d {
        Some(d) => {
            let n = thompson_size(table, alpha, d)?;
            Ok((
                n,
                format!("ceil(v({alpha}) / d^2) = ceil({v} / {d}^2) = {n}"),
            ))
        }
        None => {
            let n = parker_hall_size(v, clusters, r)?;
            Ok((
                n,
                format!("ceil(v({alpha}) * c^2 / r^2) = ceil({v} * {clusters}^2 / {r}^2) = {n}"),
            ))
        }
    }
}

/// Sweeps supported by `bench`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchMode {
    EpsilonSweep,
    SizeSweep,
    PartitionSweep,
    BaselineCompare,
}

impl BenchMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "epsilon-sweep" => Ok(BenchMode::EpsilonSweep),
            "size-sweep" => Ok(BenchMode::SizeSweep),
            "partition-sweep" => Ok(BenchMode::PartitionSweep),
            "baseline-compare" => Ok(BenchMode::BaselineCompare),
            _ => Err(FcmError::Unsupported {
                name: "bench mode",
                value: s.to_string(),
                supported: "epsilon-sweep, size-sweep, partition-sweep, baseline-compare".into(),
            }),
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            BenchMode::EpsilonSweep => vec![5e-2, 5e-3, 5e-5, 5e-7],
            BenchMode::SizeSweep => vec![125_000.0, 250_000.0, 500_000.0, 1_000_000.0],
            BenchMode::PartitionSweep => vec![1.0, 2.0, 4.0, 8.0],
            BenchMode::BaselineCompare => vec![0.0],
        }
    }
}

/// One measured row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub value: f64,
    pub bigfcm_ms: f64,
    pub bigfcm_iterations: usize,
    pub bigfcm_objective: f64,
    pub baseline: Option<(f64, usize, f64)>,
}

/// Result of `bench`.
#[derive(Debug, Clone)]
pub struct BenchTable {
    pub mode: BenchMode,
    pub rows: Vec<BenchRow>,
    pub complete: bool,
    pub config: BTreeMap<String, String>,
}

impl BenchTable {
    /// Delimited table preceded by `#`-prefixed config echo lines.
    pub fn render(&self, delimiter: char) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# {k} = {v}");
        }
        if !self.complete {
            out.push_str("# incomplete\n");
        }
        let d = delimiter;
        let _ = writeln!(
            out,
            "value{d}bigfcm_ms{d}bigfcm_iterations{d}bigfcm_objective{d}fcm_ms{d}fcm_iterations{d}fcm_objective{d}speedup"
        );
        for r in &self.rows {
            let _ = write!(
                out,
                "{}{d}{:.3}{d}{}{d}{:e}",
                r.value, r.bigfcm_ms, r.bigfcm_iterations, r.bigfcm_objective
            );
            match r.baseline {
                Some((ms, it, q)) => {
                    let s = relative_speedup(ms, r.bigfcm_ms).map_or(f64::NAN, |s| s);
                    let _ = writeln!(out, "{d}{ms:.3}{d}{it}{d}{q:e}{d}{s:.3}");
                }
                None => {
                    let _ = writeln!(out, "{d}{d}{d}{d}");
                }
            }
        }
        out
    }
}

/// Single-worker `fcm_fast` over the whole dataset from uniformly drawn
/// records. Returns `(ms, iterations, objective)`.
pub fn baseline_fcm(
    data: PointsRef<'_, f64>,
    params: &FcmParams<f64>,
) -> Result<(f64, usize, f64)> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = seed_uniform(data, params.c, &mut rng)?;
    let r = fcm_fast(data, &init, params)?;
    Ok((t.elapsed().as_secs_f64() * 1e3, r.iterations, r.objective))
}

/// Total iterations across pipeline stages.
fn pipeline_iterations(m: &ClusterModel) -> usize {
    m.report.driver_iterations + m.report.total_combiner_iterations() + m.report.reduce_iterations
}

/// Synthetic data used by `bench` when no input file is configured: the
/// four-corner mixture with a chosen spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub sigma: f64,
}

impl SyntheticSpec {
    pub fn mixture(&self) -> Result<GaussianMixture> {
        GaussianMixture::new(GaussianMixture::four_corners().means, self.sigma)
    }
}

/// Runs a sweep over `values`. Without an input file the synthetic mixture
/// is generated from the seed.
pub fn cmd_bench(
    cfg: &RunConfig,
    mode: BenchMode,
    values: Option<&[f64]>,
    cancel: Option<&AtomicBool>,
) -> Result<BenchTable> {
    let data = match &cfg.input {
        Some(_) => load_input(cfg)?.points,
        None => {
            let n = match mode {
                BenchMode::SizeSweep => values
                    .unwrap_or(&mode.default_values())
                    .iter()
                    .fold(0.0f64, |a, &b| a.max(b))
                    as usize,
                _ => cfg.synthetic.n,
            };
            cfg.synthetic.mixture()?.sample(n, cfg.seed).0
        }
    };
    let values = values.map_or_else(|| mode.default_values(), <[f64]>::to_vec);
    let started = Instant::now();
    let mut table = BenchTable {
        mode,
        rows: Vec::new(),
        complete: true,
        config: cfg.echo(),
    };

    for &value in &values {
        if cancel.is_some_and(|c| c.load(std::sync::atomic::Ordering::Relaxed)) {
            table.complete = false;
            break;
        }
        let over_budget = cfg
            .budget_secs
            .is_some_and(|b| started.elapsed().as_secs_f64() > b);
        if over_budget && !table.rows.is_empty() {
            table.complete = false;
            break;
        }
        let mut run = cfg.clone();
        let mut subset = data.view();
        let mut with_baseline = false;
        match mode {
            BenchMode::EpsilonSweep => {
                run.epsilon = value;
                with_baseline = true;
            }
            BenchMode::SizeSweep => {
                let n = (value as usize).clamp(1, data.len());
                subset = data.view().slice(0..n);
            }
            BenchMode::PartitionSweep => {
                run.partitions = value as usize;
                run.parallelism = value as usize;
            }
            BenchMode::BaselineCompare => with_baseline = true,
        }
        let pipeline = run.pipeline()?;
        let t = Instant::now();
        let model = match run_bigfcm(subset, &pipeline, cancel) {
            Ok(m) => m,
            Err(FcmError::Cancelled) => {
                table.complete = false;
                break;
            }
            Err(e) => return Err(e),
        };
        let bigfcm_ms = t.elapsed().as_secs_f64() * 1e3;
        let objective = fcm_objective_unweighted(subset, &model.centers, pipeline.params.m)?;
        let baseline = if with_baseline {
            Some(baseline_fcm(subset, &pipeline.params)?)
        } else {
            None
        };
        log::info!("bench: value {value} done in {bigfcm_ms:.1} ms");
        table.rows.push(BenchRow {
            value,
            bigfcm_ms,
            bigfcm_iterations: pipeline_iterations(&model),
            bigfcm_objective: objective,
            baseline,
        });
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "# comment\nclusters = 3\nfuzzifier = 1.5\nseed=9\n").unwrap();
        let cfg = RunConfig::resolve(Some(&file), &[("seed".into(), "11".into())]).unwrap();
        assert_eq!(cfg.clusters, Some(3));
        assert_eq!(cfg.fuzzifier, 1.5);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.max_iter, DEFAULT_MAX_ITERATIONS);
    }

    #[test]
    fn config_errors_carry_line() {
        let mut cfg = RunConfig::default();
        match cfg.apply_config_text("clusters = 3\n\nbogus = 1\n") {
            Err(FcmError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(cfg.apply_config_text("clusters 3").is_err());
        assert!(cfg.set("fuzzifier", "x").is_err());
        assert!(cfg.set("delimiter", "ab").is_err());
    }

    #[test]
    fn echo_resolves_defaults() {
        let mut cfg = RunConfig::default();
        cfg.set("clusters", "4").unwrap();
        let e = cfg.echo();
        assert_eq!(e["intermediate_clusters"], "4");
        assert_eq!(e["epsilon"], "0.0000005");
        assert_eq!(e["driver_epsilon"], (5e-7 / 100.0).to_string());
        assert_eq!(e["max_iter"], "1000");
        assert_eq!(e["fuzzifier"], "2");
        assert_eq!(e["deterministic"], "true");
        // every echoed value is accepted back
        let mut again = RunConfig::default();
        for (k, v) in &e {
            again.set(k, v).unwrap();
        }
        assert_eq!(again.echo(), e);
    }

    #[test]
    fn v_alpha_entries_extend_the_table() {
        let mut cfg = RunConfig::default();
        cfg.set("v_alpha", "0.01:1.5, 0.1:1.0").unwrap();
        assert_eq!(cfg.v_alpha.lookup(0.01).unwrap(), 1.5);
        assert_eq!(cfg.v_alpha.lookup(0.05).unwrap(), 1.27359);
    }

    #[test]
    fn sample_size_command() {
        let t = VAlphaTable::default();
        let (n, text) = cmd_sample_size(&t, 0.05, 5, 0.10, None).unwrap();
        assert_eq!(n, 3184);
        assert!(text.ends_with("= 3184"), "{text}");
        assert_eq!(cmd_sample_size(&t, 0.05, 2, 0.10, None).unwrap().0, 510);
        assert_eq!(
            cmd_sample_size(&t, 0.05, 0, 0.10, Some(0.05)).unwrap().0,
            510
        );
        let err = cmd_sample_size(&t, 0.01, 5, 0.10, None).unwrap_err();
        assert!(err.to_string().contains("0.05"));
    }

    #[test]
    fn bench_renders_incomplete_marker() {
        let mut cfg = RunConfig::default();
        cfg.set("clusters", "4").unwrap();
        cfg.set("budget_secs", "0").unwrap();
        cfg.set("synthetic_n", "4000").unwrap();
        let t = cmd_bench(&cfg, BenchMode::PartitionSweep, Some(&[1.0, 2.0]), None).unwrap();
        // the budget is checked before each row, so only the first row runs
        assert_eq!(t.rows.len(), 1);
        assert!(!t.complete);
        let text = t.render(',');
        assert!(text.contains("# incomplete"));
        assert!(text.contains("# clusters = 4"));
    }

    #[test]
    fn bench_epsilon_sweep_has_baseline() {
        let mut cfg = RunConfig::default();
        cfg.set("clusters", "4").unwrap();
        cfg.set("synthetic_n", "4000").unwrap();
        let t = cmd_bench(&cfg, BenchMode::EpsilonSweep, Some(&[5e-2, 5e-4]), None).unwrap();
        assert!(t.complete);
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.baseline.is_some()));
        let text = t.render(',');
        let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body.len(), 3);
        assert_eq!(body[1].split(',').count(), 8);
    }
}
