//! `forestprune`: fit, prune, merge and evaluate regression forests.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forestprune::Error;

#[derive(Debug, Parser)]
#[command(name = "forestprune", version, about = "Regression-forest pruning toolkit")]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "FORESTPRUNE_OUT", default_value = "forestprune-out")]
    pub out: PathBuf,

    /// Master seed; overrides the seed in configs.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: available parallelism). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a repeated split/fit/prune/refit/test experiment from a JSON config.
    Simulate {
        /// Experiment config (JSON).
        config: PathBuf,
    },
    /// Write a synthetic scenario dataset to <out>/data.csv.
    Generate(GenerateArgs),
    /// Fit a forest on every row of a CSV file and write <out>/forest.json.
    Fit(FitArgs),
    /// Prune a forest on a validation CSV and write <out>/prune.json.
    Prune(PruneArgs),
    /// Merge the trees of a prune result into one tree (<out>/merged.{txt,json}).
    Merge(MergeArgs),
    /// Evaluate generalization bounds, or run the bound-validation simulation.
    Bounds(BoundsArgs),
    /// Correlation-distance MDS layout of a forest's trees (<out>/layout.csv).
    Viz(VizArgs),
    /// Summarize a records.csv from `simulate` against one or more baselines.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of rows.
    #[arg(long)]
    pub n: usize,
    /// Predictors that enter the response.
    #[arg(long, default_value_t = 2)]
    pub relevant_vars: usize,
    /// Total predictors.
    #[arg(long, default_value_t = 10)]
    pub total_vars: usize,
    /// Noise variance σ².
    #[arg(long)]
    pub noise_variance: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of trees.
    #[arg(long, default_value_t = 25)]
    pub trees: usize,
    /// Per-feature inclusion probability of the random subspace.
    #[arg(long, default_value_t = 0.8)]
    pub subspace_rate: f64,
    /// Complexity parameter: minimum relative SSE reduction per split.
    #[arg(long, default_value_t = 0.01)]
    pub cp: f64,
    /// Smallest node that may be split.
    #[arg(long, default_value_t = 20)]
    pub min_split: usize,
    /// Smallest allowed leaf.
    #[arg(long, default_value_t = 7)]
    pub min_bucket: usize,
    /// Maximum tree depth (root = 0).
    #[arg(long, default_value_t = 30)]
    pub max_depth: usize,
    /// Fit every tree on the full sample instead of a bootstrap resample.
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Forest JSON written by `fit`.
    #[arg(long)]
    pub forest: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// SFS, SBS', BSF, LASSO, or sized variants such as BSF3 and LASSO4.
    #[arg(long)]
    pub method: String,
    /// Subset-size cap for BSF.
    #[arg(long)]
    pub k: Option<usize>,
    /// Tree cap for LASSO.
    #[arg(long)]
    pub max_trees: Option<usize>,
    /// Cross-validation folds for LASSO.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Forest JSON written by `fit`.
    #[arg(long)]
    pub forest: PathBuf,
    /// Prune result JSON written by `prune`.
    #[arg(long)]
    pub prune: PathBuf,
    /// Refuse merges that would produce more leaves than this.
    #[arg(long, default_value_t = forestprune::merge::DEFAULT_LEAF_BUDGET)]
    pub max_leaves: usize,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Run the bound-validation simulation from this JSON config instead.
    #[arg(long, conflicts_with_all = ["kind", "n", "b", "k", "delta", "m", "r", "lambda_l1", "tau", "sigma", "cardinality"])]
    pub simulate: Option<PathBuf>,
    /// Which bound to print.
    #[arg(long, value_enum, default_value = "all")]
    pub kind: commands::BoundKind,
    /// Validation sample size.
    #[arg(long, default_value_t = 1000.0)]
    pub n: f64,
    /// Forest size.
    #[arg(long, default_value_t = 100)]
    pub b: usize,
    /// BSF subset-size cap.
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    /// Confidence parameter δ.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Label range M.
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Label magnitude r = max(|inf Y|, sup Y).
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// ℓ1 budget of the Lasso weights.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_l1: f64,
    /// τ of the Lasso risk bound.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    /// Sub-Gaussian noise scale σ of the Lasso risk bound.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Hypothesis-class size for the finite-class bound.
    #[arg(long)]
    pub cardinality: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Forest JSON written by `fit`.
    #[arg(long)]
    pub forest: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Prune result JSON; its trees are flagged as selected.
    #[arg(long)]
    pub prune: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// records.csv written by `simulate`.
    pub records: PathBuf,
    /// Baselines: FULL or method labels. Repeatable.
    #[arg(long, default_values_t = [String::from("FULL")])]
    pub baseline: Vec<String>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| commands::run(&cli)) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: cannot write output: {e}");
                    ExitCode::from(1)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
