//! Command-line front end. `run` parses arguments and returns what the binary
//! prints, so commands can be exercised in-process.

mod commands;
pub mod dataset;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cass::CassConfig;
use crate::simindex::Metric;

pub use commands::{compare_sources, evaluate_corpus};
pub use manifest::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0:#}")]
    Domain(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

/// Text destined for stdout and stderr.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Mean average precision at R over all queries.
    Mapr,
    /// Pairwise average precision over all program pairs.
    Ap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Binary,
    Count,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// CASS configuration id A-B-C-D-E [default: 0-0-0-0-0]
    #[arg(long, global = true)]
    pub config: Option<CassConfig>,
    /// Similarity metric: dot or cosine
    #[arg(long, global = true, default_value = "cosine")]
    pub metric: Metric,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// Output format [default: json, csv for sweep]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

impl GlobalArgs {
    pub fn config(&self) -> CassConfig {
        self.config.unwrap_or(CassConfig::SPT)
    }
}

#[derive(Debug, Parser)]
#[command(name = "misim", version, about = "Code similarity with configurable CASS features")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Parse a source file and print its concrete syntax tree as JSON
    Parse { file: PathBuf },
    /// Build the CASS of a source file
    Cass {
        file: PathBuf,
        /// Input is a serialized syntax tree instead of source
        #[arg(long)]
        tree: bool,
        #[arg(long)]
        keep_literals: bool,
    },
    /// Extract feature bags (one JSON line per program)
    Featurize {
        files: Vec<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        keep_literals: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a vocabulary from a feature file
    Vocab {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_count: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score two source files
    Compare { a: PathBuf, b: PathBuf },
    /// Index a dataset for retrieval
    Index {
        #[arg(long)]
        dataset: PathBuf,
        /// Vocabulary file; built from the dataset when absent
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        min_count: u32,
        #[arg(long, value_enum, default_value = "binary")]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve the nearest indexed programs for a source file
    Query {
        #[arg(long)]
        index: PathBuf,
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Evaluate retrieval quality on a dataset
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long = "eval", value_enum, default_value = "mapr")]
        measure: Measure,
        /// train,validation,test class fractions; evaluates the test part
        #[arg(long)]
        split: Option<String>,
        /// Score with a trained checkpoint instead of sparse features
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare configurations over sampled problem groups
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        /// "all" or a comma-separated list of configuration ids
        #[arg(long, default_value = "all")]
        configs: String,
        #[arg(long, default_value_t = 1000)]
        groups: usize,
        #[arg(long, default_value_t = 5)]
        group_size: usize,
        /// JSON list of groups (lists of class names) instead of sampling
        #[arg(long)]
        groups_file: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the bag-of-features scorer
    Train(TrainArgs),
    /// Check analytic gradients against finite differences
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "0.6,0.2,0.2")]
    pub split: String,
    #[arg(long, default_value_t = 1)]
    pub min_count: u32,
    #[arg(long, default_value_t = 80.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.4)]
    pub margin: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 16)]
    pub p: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f64,
    #[arg(long, value_enum, default_value = "binary")]
    pub pooling: ModeArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub vocab: usize,
    #[arg(long, default_value_t = 6)]
    pub programs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 80.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.4)]
    pub margin: f64,
}

/// Runs one invocation. Argument errors come back as [`CliError::Usage`]
/// carrying clap's rendered message.
pub fn run<I, T>(args: I) -> Result<Output, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Output { stdout: e.to_string(), stderr: String::new() }),
                _ => Err(CliError::Usage(e.render().to_string())),
            };
        }
    };
    if cli.global.jobs > 0 {
        // fails only if the pool was already configured in this process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.global.jobs).build_global();
    }
    commands::dispatch(&cli.global, &cli.command)
}
