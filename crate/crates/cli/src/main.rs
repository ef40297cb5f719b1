//! `gamilt` command-line tool.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gamilt", version, about = "Boosted model-based trees for additive models with interactions")]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "GAMI_THREADS")]
    threads: Option<usize>,

    /// JSON file supplying flags for the subcommand; command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and save it.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Score a CSV with a saved model.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Rank candidate interaction pairs.
    #[command(args_override_self = true)]
    Filter(FilterArgs),
    /// Purify a saved model on a dataset.
    #[command(args_override_self = true)]
    Purify(PurifyArgs),
    /// Check prediction invariance and orthogonality of a purified model.
    #[command(args_override_self = true)]
    Verify(VerifyArgs),
    /// Generate a simulation dataset.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Write effect curves, surfaces and the importance table as CSV.
    #[command(args_override_self = true)]
    Report(ReportArgs),
    /// Rerun a simulation scenario over several seeds.
    #[command(args_override_self = true)]
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// The CSV has no header row; columns are named c1, c2, ...
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Train, validation and test fractions.
    #[arg(long, default_value = "0.5,0.25,0.25")]
    pub split: String,
    /// Seed for the split and any subsampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Squared,
    Logloss,
}

#[derive(Debug, Clone, Args)]
pub struct TreeArgs {
    #[arg(long, value_enum, default_value_t = LossArg::Squared)]
    pub loss: LossArg,
    #[arg(long, default_value_t = gamilt::boost::DEFAULT_LEARNING_RATE)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = gamilt::boost::DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = gamilt::boost::DEFAULT_PATIENCE)]
    pub patience: usize,
    #[arg(long, default_value_t = gamilt::modeltree::DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    /// Minimum rows per leaf; default max(20, 0.5% of training rows).
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long, default_value_t = gamilt::modeltree::DEFAULT_RIDGE)]
    pub ridge: f64,
    #[arg(long, default_value_t = gamilt::spline::DEFAULT_KNOTS)]
    pub knots: usize,
    #[arg(long, default_value_t = gamilt::binning::DEFAULT_MAX_BINS)]
    pub max_bins: usize,
    /// Row cap for interaction screening; 0 screens on every training row.
    #[arg(long, default_value_t = gamilt::filter::DEFAULT_SUBSAMPLE_CAP)]
    pub filter_subsample: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = gamilt::gami::DEFAULT_ROUNDS)]
    pub rounds: usize,
    /// Interaction pairs kept by screening each round.
    #[arg(long, default_value_t = gamilt::gami::DEFAULT_PAIRS)]
    pub pairs: usize,
    /// Skip purification on the training rows.
    #[arg(long)]
    pub no_purify: bool,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Output CSV; defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "prediction")]
    pub column: String,
    /// Emit probabilities instead of raw scores for log-loss models.
    #[arg(long)]
    pub probability: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterMethod {
    Tree,
    Fast,
}

#[derive(Debug, Clone, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, value_enum, default_value_t = FilterMethod::Tree)]
    pub method: FilterMethod,
    /// Pairs marked as selected in the output.
    #[arg(long, default_value_t = gamilt::gami::DEFAULT_PAIRS)]
    pub pairs: usize,
    /// Quantile cuts per feature for the four-quadrant method.
    #[arg(long, default_value_t = gamilt::filter::DEFAULT_FAST_GRID)]
    pub grid: usize,
    /// Screen the raw response instead of the residual after a main-effect stage.
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RowsArg {
    All,
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct RowArgs {
    /// Rows to use: every row, or the training rows of `--split`/`--seed`.
    #[arg(long, value_enum, default_value_t = RowsArg::All)]
    pub rows: RowsArg,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PurifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub rows: RowArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub rows: RowArgs,
    /// Largest allowed relative basis inner product.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ResponseArg {
    Continuous,
    Binary,
}

impl From<ResponseArg> for gamilt::ResponseKind {
    fn from(r: ResponseArg) -> Self {
        match r {
            ResponseArg::Continuous => gamilt::ResponseKind::Continuous,
            ResponseArg::Binary => gamilt::ResponseKind::Binary,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = ResponseArg::Continuous)]
    pub response: ResponseArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the true pairs go to `<out>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[arg(long)]
    pub model: u8,
    #[arg(long, default_value_t = 50_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = ResponseArg::Continuous)]
    pub response: ResponseArg,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Seed of the first repeat; repeat r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn run(argv: Vec<String>) -> Result<(), CliError> {
    let argv = config::apply_config_file(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 0 {
                return Ok(());
            }
            return Err(CliError::Usage(String::new()));
        }
    };
    let threads = cli.threads.unwrap_or(0);
    gamilt::exec::with_threads(threads, move || commands::dispatch(cli.command))
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
