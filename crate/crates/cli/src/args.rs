use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Parser)]
#[command(
    name = "mcdenoise",
    version,
    about = "MLP speech enhancement with Monte-Carlo dropout uncertainty"
)]
pub struct Cli {
    /// Base seed for every randomized step.
    #[arg(long, global = true, env = "MCDENOISE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(flatten)]
    pub stft: StftArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct StftArgs {
    /// Frame length in samples (512 = 32 ms at 16 kHz).
    #[arg(long, global = true, default_value_t = 512)]
    pub frame_len: usize,
    /// Frame shift in samples (160 = 10 ms at 16 kHz).
    #[arg(long, global = true, default_value_t = 160)]
    pub hop: usize,
    #[arg(long, global = true, default_value_t = 512)]
    pub fft_size: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Render noisy mixtures for every (clean, noise, snr) in a manifest.
    Mix(MixArgs),
    /// Train a denoising model on mixtures rendered from a manifest.
    Train(TrainArgs),
    /// Enhance a noisy file with one model.
    Enhance(EnhanceArgs),
    /// Enhance with several models, picking the least uncertain per frame.
    EnhanceMulti(EnhanceMultiArgs),
    /// Score a test file against its clean reference.
    Evaluate(EvaluateArgs),
    /// Per-frame squared error vs. predictive uncertainty.
    Correlate(CorrelateArgs),
    /// Write synthetic speech-like or noise audio.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    F32,
    Pcm16,
}

#[derive(Debug, Clone, Args)]
pub struct MixArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Encoding::F32)]
    pub encoding: Encoding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    /// Hidden-unit drop probability (0 trains a dropout-free baseline).
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Comma-separated hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "2048,2048,2048")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub weight_decay: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Stochastic passes per frame.
    #[arg(long = "passes", short = 't', default_value_t = 50)]
    pub t_passes: usize,
    #[arg(long, default_value_t = 0.0)]
    pub tau_inv: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Monte-Carlo dropout inference (default).
    #[arg(long, conflicts_with = "deterministic")]
    pub mc: bool,
    /// Single pass with dropout disabled.
    #[arg(long)]
    pub deterministic: bool,
    #[command(flatten)]
    pub mc_args: McArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeedPolicyArg {
    Independent,
    Shared,
}

#[derive(Debug, Clone, Args)]
pub struct EnhanceMultiArgs {
    /// Model files; repeat the flag or separate with commas.
    #[arg(long = "model", required = true, value_delimiter = ',')]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value_t = SeedPolicyArg::Independent)]
    pub seed_policy: SeedPolicyArg,
    #[command(flatten)]
    pub mc_args: McArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Report file (labeled text); a per-frame CSV is written beside it.
    #[arg(long)]
    pub output: PathBuf,
    /// Optional per-frame uncertainty CSV from `enhance`.
    #[arg(long)]
    pub uncertainty: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(long)]
    pub noisy: PathBuf,
    /// Per-frame CSV; a summary with the Pearson r is written beside it.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub mc_args: McArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Speech,
    White,
    Pink,
    Brown,
    Blue,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub seconds: f64,
    /// RMS level of the written signal.
    #[arg(long, default_value_t = 0.1)]
    pub rms: f64,
}
