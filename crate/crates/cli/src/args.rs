use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "rkhskit", version, about = "Kernel methods and regularization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
pub enum Command {
    /// Penalized least-squares fit; λ fixed or chosen by GCV.
    FitSpline(FitArgs),
    /// GCV (and optionally leave-one-out) curve over a λ grid.
    Tune(TuneArgs),
    /// Penalized Bernoulli likelihood for ±1 labels.
    FitLogit(ClassArgs),
    /// Hinge-loss support vector machine for ±1 labels.
    FitSvm(ClassArgs),
    /// Multicategory SVM for labels 1..k.
    FitMsvm(MsvmArgs),
    /// Smoothing-spline ANOVA decomposition.
    Ssanova(AnovaArgs),
    /// ℓ₁-penalized least squares.
    Lasso(LassoArgs),
    /// Regularized kernel estimation and embedding from dissimilarities.
    Rke(RkeArgs),
    /// Distance correlation with an optional permutation test.
    Dcor(DcorArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Seed for every stochastic step.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV with coordinates in the leading columns and the response last.
    #[arg(long)]
    pub input: PathBuf,
    /// `spline:M`, `gaussian:S`, `linear` or `precomputed:PATH`.
    #[arg(long, default_value = "spline:2")]
    pub kernel: String,
    /// Spline order, overriding the one in `--kernel`.
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, conflicts_with = "grid")]
    pub lambda: Option<f64>,
    /// Number of log-spaced λ values in [1e-8, 1e2] searched by GCV.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "spline:2")]
    pub kernel: String,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long, default_value_t = 40)]
    pub grid: usize,
    /// Also report brute-force leave-one-out scores.
    #[arg(long)]
    pub loo: bool,
    /// Randomized trace replicates at the selected λ (0 to skip).
    #[arg(long, default_value_t = 0)]
    pub replicates: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassArgs {
    /// CSV with coordinates in the leading columns and a ±1 label last.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct MsvmArgs {
    /// CSV with coordinates in the leading columns and a label in 1..k last.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "gaussian:1")]
    pub kernel: String,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// Number of classes; defaults to the largest label.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct AnovaArgs {
    /// CSV with named covariate columns and the response last.
    #[arg(long)]
    pub input: PathBuf,
    /// One-dimensional kernel used for every covariate.
    #[arg(long, default_value = "spline:2")]
    pub kernel: String,
    /// Highest interaction order, 1 or 2.
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    #[arg(long, conflicts_with = "grid")]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct LassoArgs {
    /// CSV with design columns and the response last.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct RkeArgs {
    /// CSV of `i,j,d` rows with 0-based indices.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1e-2)]
    pub lambda: f64,
    /// Embedding dimension; defaults to the smallest capturing 95% of the trace.
    #[arg(long)]
    pub rank: Option<usize>,
    /// Double-center the fitted matrix before embedding.
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value_t = 2000)]
    pub max_iters: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct DcorArgs {
    /// CSV of the first sample, one observation per row.
    #[arg(long)]
    pub x: PathBuf,
    /// CSV of the second sample, rows aligned with `--x`.
    #[arg(long)]
    pub y: PathBuf,
    /// Permutations for the independence test (0 to skip).
    #[arg(long, default_value_t = 0)]
    pub perms: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::FitSpline(a) => &a.common,
            Command::Tune(a) => &a.common,
            Command::FitLogit(a) | Command::FitSvm(a) => &a.common,
            Command::FitMsvm(a) => &a.common,
            Command::Ssanova(a) => &a.common,
            Command::Lasso(a) => &a.common,
            Command::Rke(a) => &a.common,
            Command::Dcor(a) => &a.common,
        }
    }
}
