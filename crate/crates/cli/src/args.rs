use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bayesglm",
    version,
    about = "Logistic and other GLMs with weakly informative Student-t priors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model and print the coefficient table or the saved-fit JSON.
    Fit(FitArgs),
    /// Predict new rows from a saved fit.
    Predict(PredictArgs),
    /// Cross-validate a grid of priors on a binary outcome.
    Cv(CvArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Logistic,
    Linear,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file.
    pub input: PathBuf,

    /// Outcome column.
    #[arg(long)]
    pub outcome: String,

    /// Column of binomial trial counts (or Poisson exposures / linear weights).
    #[arg(long)]
    pub trials: Option<String>,

    /// Pass numeric inputs through unscaled; the prior scales are adjusted instead.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file (atomically) instead of stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = FamilyArg::Logistic)]
    pub family: FamilyArg,

    /// Prior scale for coefficients (`inf` for flat).
    #[arg(long, default_value_t = 2.5, allow_negative_numbers = true)]
    pub prior_scale: f64,

    /// Prior degrees of freedom (1 = Cauchy, `inf` = normal).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub prior_df: f64,

    /// Prior scale for the intercept (`inf` for flat).
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub intercept_scale: f64,

    /// Iteration cap.
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,

    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Saved fit written by `fit --format json`.
    #[arg(long)]
    pub model: PathBuf,

    /// New data CSV.
    pub input: PathBuf,

    /// Report the linear predictor instead of the response-scale prediction.
    #[arg(long)]
    pub link_scale: bool,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,

    /// Number of folds.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    pub folds: u32,

    /// Seed for the fold assignment.
    #[arg(long, env = "BAYESGLM_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Prior grid as comma-separated `nu:scale` pairs or `flat`, e.g. `1:2.5,inf:10,flat`.
    #[arg(long)]
    pub grid: Option<String>,

    /// Only the pooled rows (`fold = all`).
    #[arg(long)]
    pub pooled: bool,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(flatten)]
    pub out: OutputArgs,
}
