use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ease_core::{GramMode, MetricSpec, SplitMode};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "ease", version, propagate_version = true, about = "Closed-form item-item recommender: ingest, split, train, evaluate")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "EASE_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an interaction log into the canonical matrix format.
    Ingest(IngestArgs),
    /// Generate a synthetic dataset with planted item clusters.
    Synth(SynthArgs),
    /// Split a matrix into training and evaluation users.
    Split(SplitArgs),
    /// Compute and store the Gram matrix of a training matrix.
    Gram(GramArgs),
    /// Fit the weight matrix for one regularization strength.
    Train(TrainArgs),
    /// Score held-out users and report ranking metrics.
    Evaluate(EvaluateArgs),
    /// Write top-k lists for every user of a matrix or split.
    Recommend(RecommendArgs),
    /// Summarize a model: weight histogram and recommendation counts.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Delimited `user,item[,value[,timestamp]]` file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; receives matrix.txt and its vocabulary sidecar.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub min_user_activity: usize,
    #[arg(long, default_value_t = 0)]
    pub min_item_activity: usize,
    /// Store every kept interaction as 1.
    #[arg(long)]
    pub binarize: bool,
    /// Drop interactions whose value is below this.
    #[arg(long, default_value_t = 0.0)]
    pub value_threshold: f64,
    /// Field separator (default: tab if present, else comma).
    #[arg(long)]
    pub delimiter: Option<char>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub users: usize,
    #[arg(long, default_value_t = 500)]
    pub items: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    /// Fewest items per user.
    #[arg(long, default_value_t = 5)]
    pub min_items: usize,
    /// Most items per user; at most items / clusters.
    #[arg(long, default_value_t = 40)]
    pub max_items: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Strong,
    Weak,
}

impl From<ModeArg> for SplitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Strong => SplitMode::Strong,
            ModeArg::Weak => SplitMode::Weak,
        }
    }
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    /// Matrix file, or a directory holding matrix.txt.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "strong")]
    pub mode: ModeArg,
    /// Strong mode: users held out for validation.
    #[arg(long, default_value_t = 0)]
    pub val_users: usize,
    /// Strong mode: users held out for testing.
    #[arg(long, default_value_t = 0)]
    pub test_users: usize,
    /// Strong mode: share of each evaluation user's items given as input.
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub fold_in_frac: f64,
    /// Weak mode: share of each user's items kept for training.
    #[arg(long, default_value_t = 0.3, value_parser = fraction)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GramModeArg {
    Cooccurrence,
    Centered,
    Standardized,
}

impl From<GramModeArg> for GramMode {
    fn from(m: GramModeArg) -> Self {
        match m {
            GramModeArg::Cooccurrence => GramMode::Cooccurrence,
            GramModeArg::Centered => GramMode::Centered,
            GramModeArg::Standardized => GramMode::Standardized,
        }
    }
}

#[derive(Args, Debug)]
pub struct GramArgs {
    /// Training matrix file, split directory, or directory with matrix.txt.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "cooccurrence")]
    pub gram_mode: GramModeArg,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training matrix file, split directory, or directory with matrix.txt.
    #[arg(long, required_unless_present = "gram", conflicts_with = "gram")]
    pub input: Option<PathBuf>,
    /// Precomputed Gram matrix file (its mode is used).
    #[arg(long)]
    pub gram: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "cooccurrence")]
    pub gram_mode: GramModeArg,
    /// L2 regularization strength, must be positive.
    #[arg(long, value_parser = positive)]
    pub lambda: f64,
    /// Zero out negative weights after solving.
    #[arg(long)]
    pub clamp_nonneg: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Baseline {
    Popularity,
    Cosine,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Subset {
    Test,
    Validation,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub model: Option<PathBuf>,
    /// Evaluate a baseline fitted on the split's training matrix.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub split: PathBuf,
    #[arg(long, default_value = "recall@20,recall@50,ndcg@100", value_parser = metric_list)]
    pub metrics: MetricList,
    #[arg(long, value_enum, default_value = "test")]
    pub on: Subset,
    /// Dataset label for the report (ml-20m, netflix, msd, ml-10m, ...).
    #[arg(long, default_value = "unnamed")]
    pub dataset: String,
    /// Write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Print JSON instead of the table.
    #[arg(long)]
    pub json: bool,
    /// Print differences to published results for `--dataset`.
    #[arg(long)]
    pub compare_paper: bool,
}

#[derive(Args, Debug)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Matrix file of histories, or a split directory (test fold-ins).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Allow items already in the history to be recommended.
    #[arg(long)]
    pub include_seen: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Write the off-diagonal weight histogram as CSV.
    #[arg(long)]
    pub weights_histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    /// Write per-item top-k recommendation counts as CSV.
    #[arg(long, requires = "input")]
    pub rec_counts: Option<PathBuf>,
    /// Histories for `--rec-counts` (matrix file or split directory).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be a positive number, got {s}"))
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {s}"))
    }
}

/// A comma-separated metric list taken as one argument value.
#[derive(Clone, Debug)]
pub struct MetricList(pub Vec<MetricSpec>);

fn metric_list(s: &str) -> Result<MetricList, String> {
    MetricSpec::parse_list(s).map(MetricList).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set thread count: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Synth(a) => commands::synth(a),
        Command::Split(a) => commands::split(a),
        Command::Gram(a) => commands::gram(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Recommend(a) => commands::recommend(a),
        Command::Inspect(a) => commands::inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // output cut short by a closed pipe (e.g. `| head`) is not a failure
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            || matches!(c.downcast_ref::<ease_core::Error>(), Some(ease_core::Error::Io(io)) if io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
