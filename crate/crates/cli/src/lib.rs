//! The `gazeperc` command line: one subcommand per stage, each writing into
//! its own run directory together with a manifest of the resolved settings
//! and input digests.

mod commands;
mod error;
mod manifest;
mod settings;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use gazeperc_pipeline::BaselineKind;

pub use error::{CliError, Result};
pub use manifest::{Inputs, RunManifest};
pub use settings::{AttributeSettings, ModelSettings, Overrides, SampleSettings, Settings, StatsSettings};

#[derive(Debug, Parser)]
#[command(name = "gazeperc", version, about = "Gaze-guided urban perception modeling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Output directory and setting overrides shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run directory; must be new or empty
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Where the dataset files live. `--data` points at a directory laid out
/// like `synth` output; the individual flags override its parts.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Gaze samples CSV
    #[arg(long, value_name = "FILE")]
    pub gaze: Option<PathBuf>,
    /// Ratings JSONL
    #[arg(long, value_name = "FILE")]
    pub ratings: Option<PathBuf>,
    /// Directory of label maps (`<image_id>.pgm`)
    #[arg(long, value_name = "DIR")]
    pub labels: Option<PathBuf>,
    /// Directory of patch embeddings (`<image_id>.gpemb`)
    #[arg(long, value_name = "DIR")]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect fixations and saccades; writes events.csv
    Detect {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Scanpath features and fixation heatmaps; writes features.csv and heatmaps/
    Features {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Per-trial AOI fixation-time shares; writes aoi.csv
    Aoi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// ANOVA, Tukey HSD and rater agreement; writes stats.csv, plot.json, report.json
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Model input sequences for one variant; writes tokens.jsonl
    Tokenize {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train and test a model variant
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Score a checkpoint on the test split; writes metrics.json
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
    },
    /// Train and test a reference model
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// aoi_composition, aoi_seq, patch_seq, image_only, gaze_weighted_pool or heatmap_mlp
        #[arg(long)]
        kind: BaselineKind,
    },
    /// Train and test under an input ablation (set with --ablation)
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Integrated-gradients attributions of a checkpoint; writes attribution.json
    Attribute {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
    },
    /// Generate a synthetic dataset
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Quota-sample image ids from a per-image score table; writes sample.json
    Sample {
        #[command(flatten)]
        common: Common,
        /// CSV with image_id and one score column per dimension
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
    },
    /// Every stage end to end into one run directory
    Pipeline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Generate the input with the synthetic defaults instead of reading files
        #[arg(long)]
        synth_default: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Detect { .. } => "detect",
            Command::Features { .. } => "features",
            Command::Aoi { .. } => "aoi",
            Command::Stats { .. } => "stats",
            Command::Tokenize { .. } => "tokenize",
            Command::Train { .. } => "train",
            Command::Eval { .. } => "eval",
            Command::Baseline { .. } => "baseline",
            Command::Ablate { .. } => "ablate",
            Command::Attribute { .. } => "attribute",
            Command::Synth { .. } => "synth",
            Command::Sample { .. } => "sample",
            Command::Pipeline { .. } => "pipeline",
        }
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::execute(cli.command, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
