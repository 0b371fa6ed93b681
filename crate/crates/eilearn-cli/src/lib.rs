//! Flag parsing and command execution for the `eilearn` binary. Lives in a
//! library so tests (and the acceptance suite) drive the exact same code
//! path as the executable, including `@file` flag-file expansion.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use eilearn::data::{Dataset, SplitPlan};
use eilearn::engine::{run_experiment, ClustererKind, ExperimentConfig};
use eilearn::learner::TreeParams;
use eilearn::report::{render_csv, render_json, render_markdown};

/// Splits flag-file text into argv tokens: whitespace-separated, with `#`
/// starting a comment that runs to the end of the line.
pub fn parse_flags_text(text: &str) -> Vec<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
        .map(str::to_owned)
        .collect()
}

/// Expands `@path` arguments into the tokens of the referenced flag file.
/// Expansion is not recursive.
pub fn expand_argfiles(args: impl IntoIterator<Item = String>) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for arg in args {
        if let Some(path) = arg.strip_prefix('@') {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read flag file {path}"))?;
            out.extend(parse_flags_text(&text));
        } else {
            out.push(arg);
        }
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(
    name = "eilearn",
    version,
    about = "Incremental ensemble learning experiments",
    after_help = "Any argument of the form @FILE is replaced by the whitespace-separated\n\
                  tokens of FILE before parsing ('#' comments allowed), e.g.\n\
                  `eilearn run @configs/diabetes.flags --seed 7 --out out/`."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment and write its reports.
    Run(ExperimentArgs),
    /// Check a configuration and print the planned split sizes without running.
    ValidateConfig(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClustererArg {
    Em,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Md,
    Json,
    Csv,
    All,
}

fn parse_phases(s: &str) -> Result<usize, String> {
    let v: usize = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if v == 0 {
        return Err("phases must be \u{2265} 1".to_owned());
    }
    Ok(v)
}

#[derive(Debug, Parser)]
pub struct ExperimentArgs {
    /// CSV dataset: UTF-8, header row, one instance per row.
    #[arg(long)]
    pub data: PathBuf,

    /// Name of the class column.
    #[arg(long)]
    pub label: String,

    /// Instances assigned to the train/test pool T; the rest form the
    /// validation set V.
    #[arg(long)]
    pub holdout: usize,

    /// Number of incremental learning phases.
    #[arg(long, value_parser = parse_phases)]
    pub phases: usize,

    /// Fraction of each phase part used for training, in (0, 1).
    #[arg(long = "train-frac")]
    pub train_frac: f64,

    /// Clusters (hence hypotheses) per phase.
    #[arg(long)]
    pub clusters: usize,

    /// Clustering algorithm.
    #[arg(long, value_enum, default_value = "em")]
    pub clusterer: ClustererArg,

    /// Master seed; every stochastic component derives from it.
    #[arg(long)]
    pub seed: u64,

    /// Optional seed for shuffling before the holdout split. Splits are
    /// sequential when absent.
    #[arg(long = "shuffle-seed")]
    pub shuffle_seed: Option<u64>,

    /// Iteration cap for the clusterer.
    #[arg(long = "cluster-max-iters", default_value_t = 200)]
    pub cluster_max_iters: usize,

    /// Log-likelihood improvement below which EM stops.
    #[arg(long = "cluster-tol", default_value_t = 1e-6)]
    pub cluster_tol: f64,

    /// Smallest node the tree may still split.
    #[arg(long = "min-leaf", default_value_t = 2)]
    pub min_leaf: usize,

    /// Depth cap for trees; unlimited when absent.
    #[arg(long = "max-depth")]
    pub max_depth: Option<usize>,

    /// Minimum gain ratio a split must reach.
    #[arg(long = "min-gain", default_value_t = 0.0)]
    pub min_gain: f64,

    /// Output directory for report files.
    #[arg(long, env = "EILEARN_OUT", default_value = "out")]
    pub out: PathBuf,

    /// Which report files to write.
    #[arg(long, value_enum, default_value = "all")]
    pub format: FormatArg,
}

/// Maps parsed flags onto an experiment configuration.
pub fn build_config(args: &ExperimentArgs) -> ExperimentConfig {
    ExperimentConfig {
        data_path: args.data.clone(),
        label_column: args.label.clone(),
        plan: SplitPlan {
            holdout_size: args.holdout,
            phases: args.phases,
            train_fraction: args.train_frac,
            shuffle_seed: args.shuffle_seed,
        },
        clusterer: match args.clusterer {
            ClustererArg::Em => ClustererKind::Em,
            ClustererArg::Kmeans => ClustererKind::KMeans,
        },
        clusters: args.clusters,
        cluster_max_iters: args.cluster_max_iters,
        cluster_tol: args.cluster_tol,
        tree: TreeParams {
            min_leaf: args.min_leaf,
            max_depth: args.max_depth,
            min_gain: args.min_gain,
        },
        master_seed: args.seed,
    }
}

/// Runs a parsed command. `Ok` carries the process exit code; `Err` is a
/// runtime failure the caller reports on stderr with exit code 1.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run(args) => run(&args),
        Command::ValidateConfig(args) => validate_config(&args),
    }
}

fn run(args: &ExperimentArgs) -> Result<i32> {
    let cfg = build_config(args);
    let report = run_experiment(&cfg)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let markdown = render_markdown(&report);
    let write_file = |name: &str, contents: &str| -> Result<()> {
        let path = args.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    };
    if matches!(args.format, FormatArg::Md | FormatArg::All) {
        write_file("report.md", &markdown)?;
    }
    if matches!(args.format, FormatArg::Json | FormatArg::All) {
        write_file("report.json", &render_json(&report))?;
    }
    if matches!(args.format, FormatArg::Csv | FormatArg::All) {
        write_file("report.csv", &render_csv(&report))?;
    }

    let mut stdout = std::io::stdout().lock();
    stdout.write_all(markdown.as_bytes())?;
    Ok(0)
}

fn validate_config(args: &ExperimentArgs) -> Result<i32> {
    let cfg = build_config(args);
    let dataset = Dataset::load_csv(&cfg.data_path, &cfg.label_column, &Default::default())?;

    let numeric = dataset
        .schema()
        .attributes
        .iter()
        .filter(|a| matches!(a.kind, eilearn::data::AttrKind::Numeric))
        .count();
    let attrs = dataset.schema().attributes.len();
    println!(
        "dataset: {} \u{2014} {} instances, {} attributes ({} numeric, {} categorical), {} classes",
        cfg.data_path.display(),
        dataset.len(),
        attrs,
        numeric,
        attrs - numeric,
        dataset.schema().class_count(),
    );

    let (pool, validation) = dataset.split_holdout(&cfg.plan)?;
    let parts = pool.partition_phases(cfg.plan.phases)?;
    let mut splits = Vec::with_capacity(parts.len());
    for part in &parts {
        let (train, test) = part.split_train_test(cfg.plan.train_fraction)?;
        splits.push((part.len(), train.len(), test.len()));
    }

    let uniform = splits.windows(2).all(|w| w[0] == w[1]);
    if uniform {
        let (part, train, test) = splits[0];
        println!(
            "T={} V={}; per-phase {} = {} train + {} test",
            pool.len(),
            validation.len(),
            part,
            train,
            test
        );
    } else {
        let sizes: Vec<usize> = splits.iter().map(|s| s.0).collect();
        let tt: Vec<String> = splits.iter().map(|s| format!("{}+{}", s.1, s.2)).collect();
        println!(
            "T={} V={}; phase parts {:?}; train+test per part [{}]",
            pool.len(),
            validation.len(),
            sizes,
            tt.join(", ")
        );
    }

    let smallest_train = splits.iter().map(|s| s.1).min().unwrap_or(0);
    if cfg.clusters > smallest_train {
        bail!(
            "{} clusters exceed the smallest phase training set ({} instances)",
            cfg.clusters,
            smallest_train
        );
    }
    println!("config is runnable");
    Ok(0)
}
