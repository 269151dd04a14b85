//! End-to-end runs over a corpus, baselines, and run-directory output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use gazeperc_core::Dimension;
use gazeperc_nn::{write_checkpoint, TrainConfig, Variant};
use serde::{Deserialize, Serialize};

use crate::ablate::{ablate_all, Ablation};
use crate::corpus::{spec_for, Corpus};
use crate::error::{PipelineError, Result};
use crate::split::split_dataset;
use crate::tokens::GazeRepr;
use crate::train::{train_eval, RunTag, SplitData, Training};

/// Backbone size overriding a variant's default architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub variant: Variant,
    pub repr: GazeRepr,
    pub dimension: Dimension,
    pub ablation: Ablation,
    pub n_seeds: usize,
    pub split_seed: u64,
    pub arch: Option<Arch>,
    pub train: TrainConfig,
}

impl RunPlan {
    pub fn new(variant: Variant, dimension: Dimension) -> Self {
        Self {
            variant,
            repr: GazeRepr::XyDurSacc,
            dimension,
            ablation: Ablation::None,
            n_seeds: 5,
            split_seed: 0,
            arch: None,
            train: TrainConfig::default(),
        }
    }
}

/// Builds inputs, applies the ablation to every split, and trains.
pub fn run(corpus: &Corpus, plan: &RunPlan) -> Result<Training> {
    let seqs = corpus.inputs(plan.variant, plan.repr, plan.dimension)?;
    let seqs = ablate_all(&seqs, plan.ablation, plan.train.seed);
    let split = split_dataset(&corpus.image_ids(), plan.split_seed)?;
    let data = SplitData::new(&seqs, &split)?;
    let mut spec = spec_for(plan.variant, &seqs)?;
    if let Some(a) = plan.arch {
        spec = spec.resized(a.n_layers, a.n_heads, a.d_model);
    }
    let tag = RunTag { dimension: plan.dimension, ablation: plan.ablation, repr: Some(plan.repr) };
    train_eval(&data, &spec, &plan.train, plan.n_seeds, tag)
}

/// Reference models that see the scene, or gaze only as a spatial map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    AoiComposition,
    AoiSeq,
    PatchSeq,
    ImageOnly,
    GazeWeightedPool,
    HeatmapMlp,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::AoiComposition,
        BaselineKind::AoiSeq,
        BaselineKind::PatchSeq,
        BaselineKind::ImageOnly,
        BaselineKind::GazeWeightedPool,
        BaselineKind::HeatmapMlp,
    ];

    pub fn variant(self) -> Variant {
        match self {
            BaselineKind::AoiComposition => Variant::AoiComposition,
            BaselineKind::AoiSeq => Variant::AoiSeq,
            BaselineKind::PatchSeq => Variant::PatchSeq,
            BaselineKind::ImageOnly => Variant::ImageOnly,
            BaselineKind::GazeWeightedPool => Variant::GazeWeightedPool,
            BaselineKind::HeatmapMlp => Variant::HeatmapMlp,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.variant().name())
    }
}

impl FromStr for BaselineKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        let v: Variant = s.parse()?;
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.variant() == v)
            .ok_or_else(|| PipelineError::Validation(format!("'{s}' is not a baseline")))
    }
}

pub fn run_baseline(corpus: &Corpus, kind: BaselineKind, plan: &RunPlan) -> Result<Training> {
    run(corpus, &RunPlan { variant: kind.variant(), ..plan.clone() })
}

/// Writes `config.json`, `metrics.json`, `checkpoint.gpnn` (first seed's
/// best model) and `log.csv`.
pub fn write_run_dir<C: Serialize>(dir: &Path, config: &C, training: &Training) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), to_json(config)?)?;
    fs::write(dir.join("metrics.json"), to_json(&training.result)?)?;
    if let Some(first) = training.runs.first() {
        write_checkpoint(&dir.join("checkpoint.gpnn"), &first.model)?;
    }
    let mut w = csv::Writer::from_path(dir.join("log.csv"))?;
    w.write_record(["seed", "epoch", "step", "lr", "loss", "val_macro_f1"])?;
    for run in &training.runs {
        for r in &run.log {
            w.write_record([
                r.seed.to_string(),
                r.epoch.to_string(),
                r.step.to_string(),
                r.lr.to_string(),
                r.loss.to_string(),
                r.val_macro_f1.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec_pretty(value)?;
    buf.write_all(b"\n")?;
    Ok(buf)
}
