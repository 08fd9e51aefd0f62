//! Command-line flags. Defaults mirror the library defaults.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "cgexplain",
    version,
    about = "Cell-graph classification and node-mask explanations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic RoI dataset with planted relevant nuclei.
    Synth(SynthArgs),
    /// Train the graph classifier.
    Train(TrainArgs),
    /// Explain every RoI of a split.
    Explain(ExplainArgs),
    /// Score a model and its explanations against random baselines.
    Evaluate(EvaluateArgs),
    /// Finite-difference checks of every gradient.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// 2, 3 or 5.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 140)]
    pub rois_per_class: usize,
    #[arg(long, default_value_t = 40)]
    pub min_nuclei: usize,
    #[arg(long, default_value_t = 70)]
    pub max_nuclei: usize,
    #[arg(long, default_value_t = 8)]
    pub min_planted: usize,
    #[arg(long, default_value_t = 12)]
    pub max_planted: usize,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutArg {
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayArg {
    Decoupled,
    Coupled,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetrizationArg {
    Union,
    Mutual,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Merge a 5-class dataset into the 2- or 3-class scenario.
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, value_enum, default_value_t = DecayArg::Decoupled)]
    pub decay_mode: DecayArg,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = ReadoutArg::Mean)]
    pub readout: ReadoutArg,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 50.0)]
    pub max_edge_px: f64,
    #[arg(long, value_enum, default_value_t = SymmetrizationArg::Union)]
    pub symmetrization: SymmetrizationArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskInitArg {
    Zeros,
    Normal,
}

#[derive(Debug, Args, Serialize)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 0.005)]
    pub alpha_mask: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha_entropy: f64,
    #[arg(long, default_value_t = 0.01)]
    pub explainer_lr: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub convergence_tol: f64,
    #[arg(long, value_enum, default_value_t = MaskInitArg::Zeros)]
    pub mask_init: MaskInitArg,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    #[serde(skip)]
    pub workers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub explanations: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    pub out: PathBuf,
    /// Random explanations drawn per RoI.
    #[arg(long, default_value_t = 5)]
    pub random_draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances per primitive.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    /// Optional JSON listing of the checks.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
