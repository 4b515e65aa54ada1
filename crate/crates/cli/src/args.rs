use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tunnelflow::learners::AlgorithmId;
use tunnelflow::pipeline::StageId;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "TUNNELFLOW_OUT_DIR";

/// Flow feature extraction and tunnel classification experiments.
#[derive(Debug, Parser)]
#[command(name = "tunnelflow", version, about)]
pub struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// JSON file supplying flags; the command line takes precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory receiving the output files.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded labeled corpus.
    Synth(SynthArgs),
    /// Turn captures or flow files into a feature CSV.
    Extract(ExtractArgs),
    /// Nested cross-validation of one or more algorithms.
    Nestedcv(NestedCvArgs),
    /// Cross-validated sweep over feature families, N and algorithms.
    Sweep(SweepArgs),
    /// Learning curve over training-set sizes.
    Curve(CurveArgs),
    /// Train and run the detection / tunnel / application chain.
    Pipeline(PipelineArgs),
    /// Cross-dataset or cross-MTU generalization.
    Dg(DgArgs),
    /// Impurity-based feature importance.
    Importance(ImportanceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Extract(_) => "extract",
            Command::Nestedcv(_) => "nestedcv",
            Command::Sweep(_) => "sweep",
            Command::Curve(_) => "curve",
            Command::Pipeline(_) => "pipeline",
            Command::Dg(_) => "dg",
            Command::Importance(_) => "importance",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// Flow files (.jsonl) or captures (.pcap).
    #[arg(long, short = 'i', required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,

    /// Label manifest applied to flows assembled from captures.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

fn parse_stage(s: &str) -> Result<StageId, String> {
    s.parse()
        .map_err(|e: tunnelflow::pipeline::PipelineError| e.to_string())
}

fn parse_alg(s: &str) -> Result<AlgorithmId, String> {
    s.parse().map_err(|e: tunnelflow::learners::LearnError| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Built-in profile set (`default`, `alt`) or a profile JSON file.
    #[arg(long, default_value = "default")]
    pub profiles: String,

    /// Flows per (tunnel, mtu, application) cell.
    #[arg(long, default_value_t = 100)]
    pub flows_per_cell: usize,

    #[arg(long, value_delimiter = ',', default_value = "1500,1472,1420,1400,1300,1200")]
    pub mtus: Vec<u16>,

    /// Dataset tag stored on every flow.
    #[arg(long)]
    pub tag: Option<String>,

    /// Leave out untunneled flows.
    #[arg(long)]
    pub no_untunneled: bool,

    /// Also write a pcap capture and its label manifest.
    #[arg(long)]
    pub pcap: bool,

    /// Bytes kept per frame in the pcap export.
    #[arg(long, default_value_t = 96)]
    pub snaplen: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    /// Feature spec name or inline JSON spec.
    #[arg(long, default_value = "fs2")]
    pub spec: String,

    /// N of the N-first families.
    #[arg(long, default_value_t = 50)]
    pub n: usize,

    /// Output CSV (default: features.csv in the output directory).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GridChoice {
    /// The full hyperparameter grid of each algorithm.
    Default,
    /// Library defaults only.
    Fixed,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NestedCvArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    /// detection, tunnel or app:<kind>.
    #[arg(long, default_value = "detection", value_parser = parse_stage)]
    pub stage: StageId,

    #[arg(long, default_value = "fs2")]
    pub spec: String,

    /// N of the N-first families (default: the stage default).
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long = "alg", value_delimiter = ',', default_value = "rf", value_parser = parse_alg)]
    pub algs: Vec<AlgorithmId>,

    #[arg(long, value_enum, default_value_t = GridChoice::Default)]
    pub grid: GridChoice,

    #[arg(long, default_value_t = 5)]
    pub outer_k: usize,

    #[arg(long, default_value_t = 3)]
    pub inner_k: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    #[arg(long, default_value = "detection", value_parser = parse_stage)]
    pub stage: StageId,

    /// Feature spec names (comma separated or repeated).
    #[arg(
        long = "family",
        value_delimiter = ',',
        default_value = "size,direction,signed_size,iat,elapsed,packet_burst,byte_burst"
    )]
    pub families: Vec<String>,

    #[arg(long = "n", value_delimiter = ',', default_value = "1,2,3,5,10,20,30,40,50")]
    pub n_values: Vec<usize>,

    #[arg(long = "alg", value_delimiter = ',', default_value = "rf,dt", value_parser = parse_alg)]
    pub algs: Vec<AlgorithmId>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    #[arg(long, default_value = "detection", value_parser = parse_stage)]
    pub stage: StageId,

    #[arg(long, default_value = "fs2")]
    pub spec: String,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value = "rf", value_parser = parse_alg)]
    pub alg: AlgorithmId,

    /// Training-set sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,

    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    /// Separate test flows; without them a stratified holdout is used.
    #[arg(long, num_args = 1..)]
    pub test: Vec<PathBuf>,

    /// Label manifest for test captures.
    #[arg(long)]
    pub test_labels: Option<PathBuf>,

    #[arg(long, default_value = "fs2")]
    pub spec: String,

    #[arg(long, default_value = "rf", value_parser = parse_alg)]
    pub alg: AlgorithmId,

    /// N for detection and tunnel classification.
    #[arg(long, default_value_t = 50)]
    pub stage_n: usize,

    /// N for application classification.
    #[arg(long, default_value_t = 150)]
    pub app_n: usize,

    /// Held-out fraction when no test flows are given.
    #[arg(long, default_value_t = 0.3)]
    pub holdout: f64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Mtu,
    Dataset,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DgArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    #[arg(long, value_enum)]
    pub axis: Axis,

    /// Training MTU (mtu axis).
    #[arg(long, default_value_t = 1500)]
    pub train: u16,

    /// Tested MTUs (mtu axis).
    #[arg(long, value_delimiter = ',', default_value = "1500,1472,1420,1400,1300,1200")]
    pub test_mtus: Vec<u16>,

    /// Second dataset (dataset axis).
    #[arg(long, num_args = 1..)]
    pub against: Vec<PathBuf>,

    /// Label manifest for the second dataset's captures.
    #[arg(long)]
    pub against_labels: Option<PathBuf>,

    #[arg(
        long = "spec",
        value_delimiter = ',',
        default_value = "signed_size,byte_burst,netflow_v5"
    )]
    pub specs: Vec<String>,

    #[arg(long, default_value_t = 50)]
    pub n: usize,

    /// Stage (mtu axis only; the dataset axis always uses detection).
    #[arg(long, default_value = "detection", value_parser = parse_stage)]
    pub stage: StageId,

    #[arg(long, default_value = "rf", value_parser = parse_alg)]
    pub alg: AlgorithmId,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub inputs: InputArgs,

    #[arg(long, default_value = "detection", value_parser = parse_stage)]
    pub stage: StageId,

    #[arg(long, default_value = "fs2")]
    pub spec: String,

    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value = "rf", value_parser = parse_alg)]
    pub alg: AlgorithmId,

    /// Number of features reported.
    #[arg(long, default_value_t = 20)]
    pub top: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
