use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sploc::packets::TrajectoryFormat;
use sploc::BiasMode;

use crate::scenario::ScenarioName;

pub const DEFAULT_OUT: &str = "sploc-out";
pub const DEFAULT_BIASES: &str = "-2,0-,0,0+,+2";

#[derive(Debug, Parser)]
#[command(name = "sploc", version, about = "Supervised projection pursuit over labeled data streams")]
pub struct Cli {
    /// Master seed for data generation and optimization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replicate runs and data generation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "SPLOC_OUT")]
    pub out: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate synthetic 2D molecules and write trajectories plus a manifest.
    GenData(GenDataArgs),
    /// Optimize one basis for a training scenario.
    Train(TrainArgs),
    /// Repeat training over biases and seeds.
    Replicate(ReplicateArgs),
    /// Mean square inner products between the subspaces of result bundles.
    Msip(MsipArgs),
    /// Per-atom fluctuation projected into a subspace of a bundle.
    Rmsf(RmsfArgs),
    /// Pretty-print the spectrum of a bundle.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Csv,
    Binary,
}

impl From<FormatArg> for TrajectoryFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => TrajectoryFormat::Csv,
            FormatArg::Binary => TrajectoryFormat::Binary,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// `all` or a comma-separated list of codes or patterns (e.g. EFL,FbF).
    #[arg(long, default_value = "all")]
    pub codes: String,
    /// Frames per molecule before splitting into streams.
    #[arg(long, default_value_t = 2000)]
    pub frames: usize,
    #[arg(long, default_value_t = 29)]
    pub atoms: usize,
    /// Packets per molecule.
    #[arg(long, default_value_t = 2)]
    pub streams: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

pub fn parse_bias(s: &str) -> Result<BiasMode, String> {
    s.parse::<BiasMode>().map_err(|e| e.to_string())
}

pub fn parse_scenario(s: &str) -> Result<ScenarioName, String> {
    s.parse()
}

#[derive(Debug, Args, Clone)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// FbF, abF, Fbc, All or custom.
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Option<ScenarioName>,
    /// Functional code patterns (default EbL).
    #[arg(long, value_delimiter = ',')]
    pub functional: Option<Vec<String>>,
    /// Nonfunctional code patterns (custom scenario only).
    #[arg(long, value_delimiter = ',')]
    pub nonfunctional: Option<Vec<String>>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    #[arg(long)]
    pub angle_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// One of -2, -1, 0-, 0, 0+, +1, +2.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_bias)]
    pub bias: Option<BiasMode>,
    /// Start from a config echo written by a previous run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated bias list.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',', value_parser = parse_bias, default_value = DEFAULT_BIASES)]
    pub biases: Vec<BiasMode>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
}

#[derive(Debug, Args)]
pub struct MsipArgs {
    /// Result bundle directories.
    #[arg(long, num_args = 1.., required = true)]
    pub bundles: Vec<PathBuf>,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SubspaceArg {
    #[value(name = "D")]
    D,
    #[value(name = "U")]
    U,
    #[value(name = "I")]
    I,
    Full,
}

#[derive(Debug, Args)]
pub struct RmsfArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Defaults to the manifest recorded in the bundle.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "D")]
    pub subspace: SubspaceArg,
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub bundle: PathBuf,
}
