use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pepalign_core::downstream::Task;
use pepalign_core::ingest::{Source, Split};
use pepalign_core::ssl::LossKind;
use pepalign_core::train::BatchStrategy;

#[derive(Debug, Parser)]
#[command(
    name = "pepalign",
    version,
    about = "Sequence/structure multi-view pretraining for peptides",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of PDB files into a peptide manifest.
    Ingest(IngestArgs),
    /// Split a predicted-structure manifest into pLDDT confidence buckets.
    Bucket(BucketArgs),
    /// Build residue graphs for every record and write them to a container.
    Graphs(GraphsArgs),
    /// Pretrain the sequence and structure encoders.
    Pretrain(PretrainArgs),
    /// Train a probe head on frozen embeddings and report test metrics.
    Eval(EvalArgs),
    /// Export frozen pooled sequence embeddings as JSONL.
    Embed(EmbedArgs),
    /// Run the finite-difference oracle suite over every backward pass.
    Gradcheck(GradcheckArgs),
    /// Write a synthetic paired sequence/structure manifest.
    Synth(SynthArgs),
    /// Pretrain every objective x batching cell and compare matching accuracy.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Experimental,
    Predicted,
}

impl From<SourceArg> for Source {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Experimental => Source::Experimental,
            SourceArg::Predicted => Source::Predicted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
    All,
}

impl SplitArg {
    pub fn admits(self, split: Split) -> bool {
        match self {
            SplitArg::Train => split == Split::Train,
            SplitArg::Valid => split == Split::Valid,
            SplitArg::Test => split == Split::Test,
            SplitArg::All => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Valid => "valid",
            SplitArg::Test => "test",
            SplitArg::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BatchingArg {
    Sorted,
    Random,
}

impl From<BatchingArg> for BatchStrategy {
    fn from(b: BatchingArg) -> Self {
        match b {
            BatchingArg::Sorted => BatchStrategy::LengthSorted,
            BatchingArg::Random => BatchStrategy::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory scanned (non-recursively) for .pdb / .ent files.
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    #[arg(long, value_name = "MANIFEST")]
    pub out: PathBuf,
    /// Keep chains strictly shorter than this.
    #[arg(long, default_value_t = 50)]
    pub max_len: usize,
    #[arg(long, value_enum)]
    pub source: SourceArg,
}

#[derive(Debug, Args)]
pub struct BucketArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Strictly descending mean-pLDDT cutoffs; a record lands in a bucket when its mean is above it.
    #[arg(long, value_delimiter = ',', default_value = "90,80")]
    pub thresholds: Vec<f64>,
    /// Size of the confidence-blind random bucket.
    #[arg(long, default_value_t = 500)]
    pub sample: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Radius-edge cutoff in Å (strict).
    #[arg(long, default_value_t = 10.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 10)]
    pub knn: usize,
    /// Zero residue-identity features in the structure graph.
    #[arg(long)]
    pub mask_residues: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 3)]
    pub structure_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub sequence_blocks: usize,
    #[arg(long, default_value_t = 4)]
    pub heads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// InfoNCE temperature.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
}

#[derive(Debug, Args)]
pub struct GraphsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// infonce | vae | both
    #[arg(long, default_value = "infonce")]
    pub loss: LossKind,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Length-sorted batch composition instead of random.
    #[arg(long)]
    pub sort_batches: bool,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Which manifest split to train on.
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_name = "CKPT")]
    pub out: PathBuf,
    #[arg(long, value_name = "JSONL")]
    pub log: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// cpp | solubility | affinity | contact
    #[arg(long)]
    pub task: Task,
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Adam steps for the probe head.
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-2)]
    pub head_lr: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub seed: u64,
    /// Random configurations per component.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 256)]
    pub train: usize,
    #[arg(long, default_value_t = 64)]
    pub test: usize,
    #[arg(long, default_value_t = 8)]
    pub min_len: usize,
    #[arg(long, default_value_t = 40)]
    pub max_len: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Trains on the `train` split, scores on the `test` split.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "infonce,vae,both")]
    pub losses: Vec<LossKind>,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "sorted,random"
    )]
    pub batching: Vec<BatchingArg>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<u64>,
    /// How held-out batches are built when scoring every cell.
    #[arg(long, value_enum, default_value = "sorted")]
    pub eval_batching: BatchingArg,
    #[arg(long, default_value_t = 0.02)]
    pub tie_tolerance: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Full report as JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Comparison table as Markdown.
    #[arg(long)]
    pub table: Option<PathBuf>,
}
