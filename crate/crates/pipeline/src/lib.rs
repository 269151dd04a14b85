//! From ingested trials to trained classifiers: tokenization for every
//! model variant, image-level splits, the training harness, baselines,
//! ablations, attribution summaries and quota sampling.

mod ablate;
mod attribute;
mod corpus;
mod error;
mod metrics;
mod run;
mod sample;
mod split;
mod tokens;
mod train;

pub use ablate::{ablate, ablate_all, Ablation};
pub use attribute::{attribute, AttributionSummary};
pub use corpus::{process_trial, spec_for, Corpus, CorpusConfig, TrialRecord};
pub use error::{PipelineError, Result};
pub use metrics::{accuracy, confusion, macro_f1, Confusion, MeanStd};
pub use run::{run, run_baseline, to_json, write_run_dir, Arch, BaselineKind, RunPlan};
pub use sample::{quota_sample, QuotaSample, ScoreRow};
pub use split::{split_dataset, Split, SplitAssignment, MIN_SPLIT_IMAGES};
pub use tokens::{build_fused_sequence, build_gaze_tokens, GazeRepr, SceneInput};
pub use train::{evaluate, predict, train_eval, train_seed, LogRow, RunResult, RunTag, SeedMetrics, SeedOutcome, SplitData, Training};
