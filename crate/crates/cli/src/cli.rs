use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "silkforge", version, about = "Distil, fine-tune and evaluate a spidroin repeat language model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Tsv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblationMode {
    NoDistill,
    NoLevel1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SyntheticKind {
    /// Repeat regions from the motif grammar (FASTA).
    Repeats,
    /// Broader repeat-like corpus for teacher and student training (FASTA).
    General,
    /// Unstructured sequences with Swiss-Prot residue composition (FASTA).
    Composition,
    /// Labeled records whose properties follow motif coverage (TSV with sequences).
    Properties,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download reviewed and unreviewed spidroins from UniProt into a FASTA file.
    FetchData {
        #[arg(long, default_value_t = silkforge::seqdata::uniprot::ARANEAE_TAXONOMY)]
        taxonomy: u32,
        #[arg(long, default_value = "2,3,4,5", value_delimiter = ',')]
        scores: Vec<u8>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a run configuration with the desk-scale defaults.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
        /// Output directory recorded in the config.
        #[arg(long, default_value = "runs")]
        out_dir: PathBuf,
    },
    /// Write a synthetic dataset.
    MakeSynthetic {
        #[arg(long, value_enum)]
        kind: SyntheticKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train (or load) the teacher and distil the student.
    Distill {
        #[arg(long)]
        config: PathBuf,
        /// General corpus FASTA; overrides `data.corpus`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// LoRA fine-tuning on repeat regions.
    FinetuneRepeats {
        #[arg(long)]
        config: PathBuf,
        /// Repeat FASTA; overrides `data.repeats`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Student checkpoint; defaults to `<out_dir>/student.ck`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Bidirectional property fine-tuning with fold-wise validation.
    FinetuneProperties {
        #[arg(long)]
        config: PathBuf,
        /// Properties TSV; overrides `data.properties`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Sequences for a TSV without a sequence column.
        #[arg(long)]
        fasta: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        select: Option<usize>,
        /// Level-1 checkpoint; defaults to `<out_dir>/level1.ck`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Sample sequences, optionally conditioned on raw property values.
    Generate(GenerateArgs),
    /// Estimate properties for every sequence in a FASTA file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        fasta: PathBuf,
        /// Report normalized values instead of raw units.
        #[arg(long)]
        normalized: bool,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Physicochemical, motif, divergence and validity report.
    Evaluate {
        #[arg(long)]
        fasta: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// `builtin` or a residue/probability TSV.
        #[arg(long, default_value = "builtin")]
        background: String,
        #[arg(long, default_value_t = silkforge::evalsuite::DEFAULT_WINDOW)]
        window: usize,
        #[arg(long, default_value_t = silkforge::evalsuite::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Trend metrics between predicted and reference property tables.
    Trend {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Min-max normalize both tables with the reference ranges first.
        #[arg(long)]
        normalize: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Motif-feature / property correlation matrix of a labeled dataset.
    Correlate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        fasta: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Tsv)]
        format: Format,
    },
    /// Compare the full pipeline with one stage removed.
    Ablate {
        #[arg(long, value_enum)]
        mode: AblationMode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Raw values `t,st,s,ss,e,se,b,sb`; omitted for unconditional sampling.
    #[arg(long)]
    pub properties: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_new: Option<usize>,
    /// Write FASTA here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
