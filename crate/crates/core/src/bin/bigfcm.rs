use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use bigfcm::cli::{
    cmd_bench, cmd_cluster, cmd_eval, cmd_sample_size, prep_path, BenchMode, RunConfig,
};
use bigfcm::ingest::Preprocessing;
use bigfcm::model::ModelFile;
use bigfcm::FcmError;

const EXIT_ERROR: u8 = 1;
const EXIT_INCOMPLETE: u8 = 3;
const EXIT_CANCELLED: u8 = 130;

#[derive(Parser)]
#[command(name = "bigfcm", version, about = "Scalable fuzzy c-means clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a delimited file and write a model file.
    Cluster(RunArgs),
    /// Score a model against a labeled file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Also write the report as TOML here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Timing sweeps. Uses a synthetic mixture when no input is given.
    Bench {
        /// epsilon-sweep, size-sweep, partition-sweep or baseline-compare
        #[arg(long)]
        mode: String,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Synthetic dataset size.
        #[arg(long)]
        synthetic: Option<usize>,
        /// Spread of the synthetic components.
        #[arg(long)]
        sigma: Option<f64>,
        /// Wall-clock budget in seconds.
        #[arg(long)]
        budget: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Driver sample size for a tabulated error level.
    SampleSize {
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        clusters: usize,
        /// Relative class-proportion difference (Parker–Hall).
        #[arg(long, default_value_t = 0.10)]
        rel_diff: f64,
        /// Absolute proportion difference; selects the multinomial bound.
        #[arg(long)]
        d: Option<f64>,
        /// Extra table entries, "alpha:v,alpha:v".
        #[arg(long)]
        v_alpha: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat key = value settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    intermediate_clusters: Option<usize>,
    #[arg(long)]
    fuzzifier: Option<f64>,
    /// Reducer epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    driver_epsilon: Option<f64>,
    #[arg(long)]
    combiner_epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with_all = ["alpha", "rel_diff"])]
    sample_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rel_diff: Option<f64>,
    #[arg(long, overrides_with = "no_normalize")]
    normalize: bool,
    #[arg(long, overrides_with = "normalize")]
    no_normalize: bool,
    /// Zero-based label column.
    #[arg(long)]
    label_column: Option<usize>,
    /// Zero-based categorical columns, comma separated.
    #[arg(long)]
    categorical: Option<String>,
    #[arg(long)]
    delimiter: Option<String>,
    #[arg(long)]
    header: bool,
    #[arg(long, overrides_with = "free_order")]
    deterministic: bool,
    #[arg(long, overrides_with = "deterministic")]
    free_order: bool,
    #[arg(long)]
    block_size: Option<usize>,
    #[arg(long)]
    reduce_groups: Option<usize>,
    /// Force the combiner solver: 0 = wfcmpb, 1 = fcm.
    #[arg(long)]
    flag: Option<u8>,
    /// driver or random
    #[arg(long)]
    seeding: Option<String>,
    #[arg(long)]
    silhouette_cap: Option<usize>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let s = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        put("input", s(&self.input));
        put("output", s(&self.output));
        put("clusters", self.clusters.map(|v| v.to_string()));
        put(
            "intermediate_clusters",
            self.intermediate_clusters.map(|v| v.to_string()),
        );
        put("fuzzifier", self.fuzzifier.map(|v| v.to_string()));
        put("epsilon", self.epsilon.map(|v| v.to_string()));
        put("driver_epsilon", self.driver_epsilon.map(|v| v.to_string()));
        put(
            "combiner_epsilon",
            self.combiner_epsilon.map(|v| v.to_string()),
        );
        put("max_iter", self.max_iter.map(|v| v.to_string()));
        put("partitions", self.partitions.map(|v| v.to_string()));
        put("parallelism", self.parallelism.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("sample_size", self.sample_size.map(|v| v.to_string()));
        put("alpha", self.alpha.map(|v| v.to_string()));
        put("rel_diff", self.rel_diff.map(|v| v.to_string()));
        put("normalize", self.normalize.then(|| "true".into()));
        put("normalize", self.no_normalize.then(|| "false".into()));
        put("label_column", self.label_column.map(|v| v.to_string()));
        put("categorical", self.categorical.clone());
        put("delimiter", self.delimiter.clone());
        put("header", self.header.then(|| "true".into()));
        put("deterministic", self.deterministic.then(|| "true".into()));
        put("deterministic", self.free_order.then(|| "false".into()));
        put("block_size", self.block_size.map(|v| v.to_string()));
        put("reduce_groups", self.reduce_groups.map(|v| v.to_string()));
        put("flag", self.flag.map(|v| v.to_string()));
        put("seeding", self.seeding.clone());
        put("silhouette_cap", self.silhouette_cap.map(|v| v.to_string()));
        out
    }

    fn resolve(&self) -> bigfcm::Result<RunConfig> {
        RunConfig::resolve(self.config.as_deref(), &self.overrides())
    }
}

fn write_text(path: &Path, text: &str) -> bigfcm::Result<()> {
    std::fs::write(path, text).map_err(|e| FcmError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run(cli: Cli, cancel: &AtomicBool) -> bigfcm::Result<u8> {
    match cli.command {
        Command::Cluster(args) => {
            let cfg = args.resolve()?;
            let out = cmd_cluster(&cfg, Some(cancel))?;
            match &cfg.output {
                Some(path) => eprintln!(
                    "wrote {} ({} centers, objective {:e})",
                    path.display(),
                    out.file.clusters,
                    out.file.objective
                ),
                None => print!("{}", out.text),
            }
            Ok(0)
        }
        Command::Eval { model, report, run } => {
            let file = ModelFile::read(&model)?;
            // The model's own settings form the base layer under --config and flags.
            let mut cfg = RunConfig::default();
            for (k, v) in file.config.iter().filter(|(k, _)| k.as_str() != "output") {
                cfg.set(k, v)?;
            }
            if let Some(path) = &run.config {
                cfg.apply_config_file(path)?;
            }
            for (k, v) in run.overrides() {
                cfg.set(&k, &v)?;
            }
            let prep_file = prep_path(&model);
            let prep: Option<Preprocessing> = if prep_file.exists() {
                let text = std::fs::read_to_string(&prep_file).map_err(|e| FcmError::Io {
                    path: prep_file.display().to_string(),
                    source: e,
                })?;
                Some(toml::from_str(&text).map_err(|e| FcmError::Format(e.to_string()))?)
            } else {
                None
            };
            let rep = cmd_eval(&file, prep.as_ref(), &cfg)?;
            print!("{}", rep.to_table());
            if let Some(path) = report {
                write_text(&path, &rep.to_toml()?)?;
            }
            Ok(0)
        }
        Command::Bench {
            mode,
            values,
            synthetic,
            sigma,
            budget,
            run,
        } => {
            let mut cfg = run.resolve()?;
            if budget.is_some() {
                cfg.budget_secs = budget;
            }
            if let Some(n) = synthetic {
                cfg.synthetic.n = n;
            }
            if let Some(s) = sigma {
                cfg.synthetic.sigma = s;
            }
            let mode = BenchMode::parse(&mode)?;
            let table = cmd_bench(&cfg, mode, values.as_deref(), Some(cancel))?;
            let text = table.render(',');
            match &cfg.output {
                Some(path) => write_text(path, &text)?,
                None => print!("{text}"),
            }
            if table.complete {
                Ok(0)
            } else {
                eprintln!("partial report: sweep stopped before all values ran");
                Ok(if cancel.load(Ordering::Relaxed) {
                    EXIT_CANCELLED
                } else {
                    EXIT_INCOMPLETE
                })
            }
        }
        Command::SampleSize {
            alpha,
            clusters,
            rel_diff,
            d,
            v_alpha,
            config,
        } => {
            let mut cfg = RunConfig::default();
            if let Some(path) = &config {
                cfg.apply_config_file(path)?;
            }
            if let Some(v) = &v_alpha {
                cfg.set("v_alpha", v)?;
            }
            let (n, formula) = cmd_sample_size(&cfg.v_alpha, alpha, clusters, rel_diff, d)?;
            println!("{n}");
            println!("{formula}");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let cancel = Arc::new(AtomicBool::new(false));
    {
        let cancel = Arc::clone(&cancel);
        if let Err(e) = ctrlc::set_handler(move || cancel.store(true, Ordering::Relaxed)) {
            log::warn!("cannot install signal handler: {e}");
        }
    }
    match run(cli, &cancel) {
        Ok(code) => ExitCode::from(code),
        Err(FcmError::Cancelled) => {
            eprintln!("partial report: run cancelled, no model written");
            ExitCode::from(EXIT_CANCELLED)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
