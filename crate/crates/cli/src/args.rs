use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loclin::lexicon::SplitMode;
use loclin::mapper::Init;
use loclin::{TrainConfig, Trainer, WorldConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "loclin",
    version,
    about = "Probe whether word translation maps are linear, one neighborhood at a time",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Every subcommand except `rerun` is written to `config.json` in its output
/// directory, with input paths made absolute.
#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Neighborhood sizes around anchors as the threshold is lowered.
    Neighborhood(NeighborhoodArgs),
    /// Train one global map, or an atlas of local maps with --anchors.
    Train(TrainArgs),
    /// Local maps vs. the reference anchor's map, as a table.
    Experiment(ExperimentArgs),
    /// Translate words through a map or an atlas.
    Translate(TranslateArgs),
    /// Write a synthetic world with a known generating map.
    Synth(SynthArgs),
    /// Run the locality diagnostic on a generated world.
    Diagnose(DiagnoseArgs),
    /// Repeat a run from its config.json.
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Neighborhood(a) => Some(&a.out),
            Command::Train(a) => Some(&a.out),
            Command::Experiment(a) => Some(&a.out),
            Command::Translate(a) => Some(&a.out),
            Command::Synth(a) => Some(&a.out),
            Command::Diagnose(a) => Some(&a.out),
            Command::Rerun(_) => None,
        }
    }

    pub fn set_out(&mut self, dir: PathBuf) {
        match self {
            Command::Neighborhood(a) => a.out = dir,
            Command::Train(a) => a.out = dir,
            Command::Experiment(a) => a.out = dir,
            Command::Translate(a) => a.out = dir,
            Command::Synth(a) => a.out = dir,
            Command::Diagnose(a) => a.out = dir,
            Command::Rerun(_) => {}
        }
    }

    /// Input files the command reads.
    pub fn inputs_mut(&mut self) -> Vec<&mut PathBuf> {
        let mut v = Vec::new();
        match self {
            Command::Neighborhood(a) => v.push(&mut a.src_emb),
            Command::Train(a) => {
                v.extend([&mut a.spaces.src_emb, &mut a.spaces.tgt_emb, &mut a.lexicon]);
            }
            Command::Experiment(a) => {
                v.extend([&mut a.spaces.src_emb, &mut a.spaces.tgt_emb, &mut a.lexicon]);
            }
            Command::Translate(a) => {
                v.extend([&mut a.spaces.src_emb, &mut a.spaces.tgt_emb]);
                v.extend(a.map.as_mut());
                v.extend(a.atlas.as_mut());
                v.extend(a.words_file.as_mut());
                v.extend(a.lexicon.as_mut());
            }
            Command::Synth(_) | Command::Diagnose(_) | Command::Rerun(_) => {}
        }
        v
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SpaceArgs {
    /// Source-language `.vec` file.
    #[arg(long)]
    pub src_emb: PathBuf,
    /// Target-language `.vec` file.
    #[arg(long)]
    pub tgt_emb: PathBuf,
    /// Read at most this many words from each embedding file.
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Keep vectors at their stored length.
    #[arg(long)]
    pub no_normalize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Identity,
    Zeros,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitArg {
    Random,
    Frequency,
}

impl From<SplitArg> for SplitMode {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Random => SplitMode::Random,
            SplitArg::Frequency => SplitMode::Frequency,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainFlags {
    /// `maxmargin` or `lsq`.
    #[arg(long, default_value = "maxmargin")]
    pub trainer: Trainer,
    /// Hinge margin.
    #[arg(long, default_value_t = 0.4)]
    pub gamma: f64,
    /// Negatives sampled per training pair and epoch.
    #[arg(long, default_value_t = 1)]
    pub negatives: usize,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Learning rate multiplier applied after every epoch.
    #[arg(long, default_value_t = 0.99)]
    pub lr_decay: f64,
    /// Weight of the `||W W^T - I||` penalty.
    #[arg(long, default_value_t = 0.0)]
    pub ortho: f64,
    /// Ridge strength for `lsq`.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Identity)]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainFlags {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma,
            negatives: self.negatives,
            epochs: self.epochs,
            learning_rate: self.lr,
            lr_decay: self.lr_decay,
            seed: self.seed,
            init: match self.init {
                InitArg::Identity => Init::Identity,
                InitArg::Zeros => Init::Zeros,
                InitArg::Random => Init::ScaledRandom,
            },
            ortho_weight: self.ortho,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct NeighborhoodArgs {
    #[arg(long)]
    pub src_emb: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub anchors: Vec<String>,
    /// Strictly descending cosine thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.7,0.6,0.5")]
    pub thresholds: Vec<f64>,
    /// Also list the members of N(anchor, s) at this threshold.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub max_vocab: Option<usize>,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub spaces: SpaceArgs,
    /// `source target` dictionary.
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Build an atlas with one local map per anchor neighborhood.
    #[arg(long, value_delimiter = ',')]
    pub anchors: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    /// Pairs held out for evaluation; 0 trains on everything.
    #[arg(long, default_value_t = 0)]
    pub test_size: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Neighborhoods with fewer training pairs get no local map.
    #[arg(long, default_value_t = loclin::neighborhoods::DEFAULT_MIN_TRAIN)]
    pub min_train: usize,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub spaces: SpaceArgs,
    #[arg(long)]
    pub lexicon: PathBuf,
    /// Anchor words; the first is the reference x0.
    #[arg(long, value_delimiter = ',', required = true)]
    pub anchors: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    /// Test pairs held out from each neighborhood.
    #[arg(long, default_value_t = 500)]
    pub test_size: usize,
    /// Precision@k depth.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = loclin::neighborhoods::DEFAULT_MIN_TRAIN)]
    pub min_train: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Random)]
    pub split: SplitArg,
    /// Keep only the first gold translation of each source word.
    #[arg(long)]
    pub single_ref: bool,
    /// Concurrent training jobs; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub spaces: SpaceArgs,
    /// Map file written by `train`.
    #[arg(long, conflicts_with = "atlas", required_unless_present = "atlas")]
    pub map: Option<PathBuf>,
    /// Atlas directory written by `train --anchors` or `experiment`.
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub words: Option<Vec<String>>,
    /// One source word per line.
    #[arg(long)]
    pub words_file: Option<PathBuf>,
    /// Translate every lexicon source and score against its gold targets.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WorldArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    /// Standard deviation of Gaussian noise added to targets.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Rotation radians per unit of `u.x`; 0 gives a linear world.
    #[arg(long, default_value_t = 0.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    /// Angular extent of the arc of cluster centers, in degrees.
    #[arg(long, default_value_t = 90.0)]
    pub arc: f64,
    #[arg(long, default_value_t = 3.0)]
    pub max_singular: f64,
    /// Rotation planes; all `dim / 2` when omitted.
    #[arg(long)]
    pub planes: Option<usize>,
}

impl WorldArgs {
    pub fn config(&self, seed: u64) -> WorldConfig {
        WorldConfig {
            n: self.n,
            dim: self.dim,
            noise_sigma: self.noise,
            seed,
            variation_strength: self.strength,
            clusters: self.clusters,
            cluster_spread: self.spread,
            arc_degrees: self.arc,
            max_singular: self.max_singular,
            rotation_planes: self.planes,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// The world and the training runs all derive from `--seed`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Anchors; one per cluster when omitted.
    #[arg(long, value_delimiter = ',')]
    pub anchors: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.5)]
    pub s: f64,
    #[arg(long, default_value_t = 50)]
    pub test_size: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = loclin::neighborhoods::DEFAULT_MIN_TRAIN)]
    pub min_train: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// A config.json written by an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Write here instead of the recorded output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
