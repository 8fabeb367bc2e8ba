use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mlgad_core::pipeline::TrainConfig;
use mlgad_core::Result;

const AFTER_HELP: &str = "\
Hyperparameters resolve in this order, later sources winning:
  1. built-in defaults
  2. `key = value` lines of the file given with --config
  3. command-line flags (including the global --seed)

Exit codes: 0 success, 1 runtime failure or undefined metric,
2 usage error, missing input or invalid configuration.";

#[derive(Debug, Parser)]
#[command(name = "mlgad", version, about = "Multi-level graph anomaly detection", after_help = AFTER_HELP)]
pub struct Cli {
    /// Seed for data generation, splitting, initialization and oracle trials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads for parallel sampling; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Main output path of the subcommand.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Hyperparameter file with one `key = value` per line.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark (a graph directory or a JSON-lines collection).
    Synth(SynthArgs),
    /// Write the maximum-Rayleigh-quotient subgraph of every target as JSON lines.
    Sample(SampleArgs),
    /// Train a model; writes the checkpoint to --out and the history JSON.
    Train(TrainArgs),
    /// Score a checkpoint on one partition and write the metrics report.
    Eval(EvalArgs),
    /// Train on one level with another masked, then score the masked level zero-shot.
    Transfer(TransferArgs),
    /// Compare the sampler with exhaustive enumeration on random trees.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthMode {
    Contextual,
    Structural,
    Mixed,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = SynthKind::Single)]
    pub kind: SynthKind,
    /// Node count of a single graph.
    #[arg(long, default_value_t = 1000)]
    pub nodes: usize,
    /// Fraction of anomalous nodes in a single graph.
    #[arg(long, default_value_t = 0.05)]
    pub anomaly_rate: f64,
    #[arg(long, value_enum, default_value_t = SynthMode::Mixed)]
    pub mode: SynthMode,
    /// Number of graphs in a collection.
    #[arg(long, default_value_t = 200)]
    pub graphs: usize,
    #[arg(long, default_value_t = 30)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 60)]
    pub max_nodes: usize,
    /// Fraction of anomalous graphs in a collection.
    #[arg(long, default_value_t = 0.2)]
    pub graph_anomaly_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKind {
    Nodes,
    Edges,
    All,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Graph directory or JSON-lines collection; collections are sampled as
    /// their disjoint union.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TargetKind::Nodes)]
    pub targets: TargetKind,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=3))]
    pub depth: u64,
    /// Hop decay of the pooling weights.
    #[arg(long, default_value_t = 0.5)]
    pub decay: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Graph directory or JSON-lines collection.
    #[arg(long)]
    pub input: PathBuf,
    /// History JSON path; defaults to `<out stem>.history.json` beside --out.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Checkpoint written by `train` or `transfer`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
    pub partition: String,
    /// Exit 0 even when a level has a single class and AUROC/AUPRC are undefined.
    #[arg(long)]
    pub allow_degenerate: bool,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Level whose labels are used for training.
    #[arg(long, value_parser = ["node", "edge", "graph"], default_value = "node")]
    pub source: String,
    /// Level that is masked during training and scored zero-shot.
    #[arg(long, value_parser = ["node", "edge", "graph"])]
    pub mask_level: String,
    /// Also write the transferred checkpoint here.
    #[arg(long)]
    pub model_out: Option<PathBuf>,
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, value_parser = ["train", "val", "test"], default_value = "test")]
    pub partition: String,
    #[arg(long)]
    pub allow_degenerate: bool,
    #[command(flatten)]
    pub hyper: HyperArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 12)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
}

/// One flag per configuration key; unset flags leave the key untouched.
#[derive(Debug, Default, Args)]
#[command(next_help_heading = "Hyperparameters")]
pub struct HyperArgs {
    /// Neighborhood depth of the sampler.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Hop decay of the pooling weights.
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Feature propagation steps before the encoder.
    #[arg(long)]
    pub propagation_steps: Option<usize>,
    #[arg(long)]
    pub tower_layers: Option<usize>,
    /// leaky_relu, relu or tanh.
    #[arg(long)]
    pub activation: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated levels that may receive a loss, or `all`.
    #[arg(long)]
    pub levels: Option<String>,
    /// Comma-separated levels treated as label-less, or `none`.
    #[arg(long)]
    pub mask_levels: Option<String>,
    /// inverse, direct or none.
    #[arg(long)]
    pub gamma_mode: Option<String>,
    #[arg(long)]
    pub beta_node: Option<f64>,
    #[arg(long)]
    pub beta_edge: Option<f64>,
    #[arg(long)]
    pub beta_graph: Option<f64>,
    /// Per-task gradient norm cap; 0 disables clipping.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub surgery: Option<bool>,
    /// Initial diagonal stitch coefficient.
    #[arg(long)]
    pub stitch_diag: Option<f64>,
    /// Initial off-diagonal stitch coefficient.
    #[arg(long)]
    pub stitch_off_diag: Option<f64>,
    #[arg(long)]
    pub encoder_trainable: Option<bool>,
    #[arg(long)]
    pub stitch_trainable: Option<bool>,
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Validation period in epochs; 0 keeps the last epoch.
    #[arg(long)]
    pub eval_every: Option<usize>,
}

impl HyperArgs {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(T::to_string)
        }
        [
            ("depth", s(&self.depth)),
            ("decay", s(&self.decay)),
            ("hidden_dim", s(&self.hidden_dim)),
            ("propagation_steps", s(&self.propagation_steps)),
            ("tower_layers", s(&self.tower_layers)),
            ("activation", self.activation.clone()),
            ("lr", s(&self.lr)),
            ("momentum", s(&self.momentum)),
            ("epochs", s(&self.epochs)),
            ("levels", self.levels.clone()),
            ("mask_levels", self.mask_levels.clone()),
            ("gamma_mode", self.gamma_mode.clone()),
            ("beta_node", s(&self.beta_node)),
            ("beta_edge", s(&self.beta_edge)),
            ("beta_graph", s(&self.beta_graph)),
            ("clip_norm", s(&self.clip_norm)),
            ("surgery", s(&self.surgery)),
            ("stitch_diag", s(&self.stitch_diag)),
            ("stitch_off_diag", s(&self.stitch_off_diag)),
            ("encoder_trainable", s(&self.encoder_trainable)),
            ("stitch_trainable", s(&self.stitch_trainable)),
            ("train_frac", s(&self.train_frac)),
            ("eval_every", s(&self.eval_every)),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    /// Writes every set flag into `config`.
    pub fn apply(&self, config: &mut TrainConfig) -> Result<()> {
        for (key, value) in self.pairs() {
            config.set(key, &value)?;
        }
        Ok(())
    }
}
