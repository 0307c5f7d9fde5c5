use clap::{Args, Parser, Subcommand, ValueEnum};
use signkit_core::diagnostics::DEFAULT_BINS;
use signkit_core::model::FlipMode;
use signkit_core::synth::{OcclusionMode, OcclusionTarget, DEFAULT_NOISE_SD};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "signkit", version, about = "Pose-sequence sign recognition toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (SPS1 files plus manifest.csv).
    Synth(SynthArgs),
    /// Train a model; writes checkpoint.bin, model.json and history.ndjson.
    Train(TrainArgs),
    /// Evaluate a trained model; writes outcomes.csv.
    Eval(EvalArgs),
    /// Write an occluded copy of a dataset.
    Occlude(OccludeArgs),
    /// Hand-presence analysis of an outcomes file; writes report.json and hist.csv.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub classes: usize,
    /// Samples per class.
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub signers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Coordinate noise in shoulder-width units.
    #[arg(long, default_value_t = DEFAULT_NOISE_SD)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = signkit_core::synth::DEFAULT_FRAMES.0)]
    pub min_frames: usize,
    #[arg(long, default_value_t = signkit_core::synth::DEFAULT_FRAMES.1)]
    pub max_frames: usize,
    /// Probability of a missed dominant-hand detection per frame.
    #[arg(long, default_value_t = 0.0)]
    pub miss_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Bilstm,
    TransformerCtc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FlipArg {
    Off,
    All,
    DetectedLeftHanded,
}

impl From<FlipArg> for FlipMode {
    fn from(f: FlipArg) -> Self {
        match f {
            FlipArg::Off => FlipMode::Off,
            FlipArg::All => FlipMode::All,
            FlipArg::DetectedLeftHanded => FlipMode::DetectedLeftHanded,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Validation manifest. Without it the training manifest is split by signer.
    #[arg(long)]
    pub val_manifest: Option<PathBuf>,
    /// Share of samples (by whole signers) kept for training when splitting; 1 disables validation.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 512)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = FlipArg::DetectedLeftHanded)]
    pub flip_mode: FlipArg,
    /// Skip shoulder normalization of the poses.
    #[arg(long)]
    pub no_normalize: bool,
    /// Disable per-epoch shuffling.
    #[arg(long)]
    pub no_shuffle: bool,
    // BiLSTM
    #[arg(long, default_value_t = 512)]
    pub projection_dim: usize,
    #[arg(long, default_value_t = 256)]
    pub lstm_hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub lstm_layers: usize,
    /// Dropout rate; defaults to 0.2 (bilstm) or 0.1 (transformer-ctc).
    #[arg(long)]
    pub dropout: Option<f64>,
    // Transformer-CTC
    #[arg(long, default_value_t = 128)]
    pub d_model: usize,
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 256)]
    pub ff_dim: usize,
    #[arg(long, default_value_t = signkit_core::loss::DEFAULT_BEAM_WIDTH)]
    pub beam_width: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory written by `train` (model.json and checkpoint.bin).
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Model config, overriding `<run>/model.json`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint, overriding `<run>/checkpoint.bin`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    HandsInteraction,
    HandFace,
    RandomDrop,
}

impl From<ModeArg> for OcclusionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::HandsInteraction => OcclusionMode::HandsInteraction,
            ModeArg::HandFace => OcclusionMode::HandFace,
            ModeArg::RandomDrop => OcclusionMode::RandomDrop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Dominant,
    Both,
}

impl From<TargetArg> for OcclusionTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Dominant => OcclusionTarget::Dominant,
            TargetArg::Both => OcclusionTarget::Both,
        }
    }
}

#[derive(Debug, Args)]
pub struct OccludeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = TargetArg::Dominant)]
    pub target: TargetArg,
    /// Fraction of frames occluded in each affected sample.
    #[arg(long)]
    pub fraction: f64,
    /// Fraction of samples affected (seeded choice).
    #[arg(long, default_value_t = 1.0)]
    pub sample_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub outcomes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}
