//! Ingested trials (events, features, labels) plus the per-image scene
//! inputs, and the model inputs built from them for each variant.

use std::collections::BTreeMap;

use gazeperc_core::{
    aoi_time_share, compute_features, detect_fixations, filter_invalid, fixation_heatmap, Dimension, DisplayConfig,
    EventSet, FeatureConfig, FeatureVector, FilterOutcome, IdtParams, PatchEmbeddingSet, PatchGridConfig,
    PerceptionLevel, Ratings, SemanticLabelMap, SequenceMeta, TokenSequence, Trial,
};
use gazeperc_nn::{ModelSpec, Variant};
use gazeperc_stats::AnalysisTrial;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PipelineError, Result};
use crate::tokens::{build_fused_sequence, GazeRepr, SceneInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub display: DisplayConfig,
    pub idt: IdtParams,
    pub min_valid_ratio: f64,
    pub feature_grid: FeatureConfig,
    pub patch_grid: PatchGridConfig,
    /// Gaussian width of fixation heatmaps, in degrees of visual angle.
    pub heatmap_sigma_deg: f64,
    /// Side of the square heatmap fed to the heatmap baseline.
    pub heatmap_size: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        let display = DisplayConfig::default();
        Self {
            display,
            idt: IdtParams::for_display(&display),
            min_valid_ratio: 0.75,
            feature_grid: FeatureConfig::default(),
            patch_grid: PatchGridConfig::default(),
            heatmap_sigma_deg: 1.0,
            heatmap_size: 64,
        }
    }
}

/// One usable trial after validity filtering and event detection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub image_id: String,
    pub subject_id: String,
    pub ratings: Ratings,
    pub events: EventSet,
    pub features: FeatureVector,
}

impl TrialRecord {
    pub fn level(&self, dim: Dimension) -> PerceptionLevel {
        self.ratings.level(dim)
    }

    pub fn meta(&self, dim: Dimension) -> SequenceMeta {
        SequenceMeta { image_id: self.image_id.clone(), subject_id: self.subject_id.clone(), dimension: dim }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub trials: Vec<TrialRecord>,
    pub maps: BTreeMap<String, SemanticLabelMap>,
    pub embeddings: BTreeMap<String, PatchEmbeddingSet>,
    /// One line per trial left out, with the reason.
    pub excluded: Vec<String>,
}

impl Corpus {
    pub fn new(config: CorpusConfig) -> Result<Self> {
        config.idt.validate()?;
        if !(0.0..=1.0).contains(&config.min_valid_ratio) {
            return invalid(format!("min_valid_ratio {} outside [0, 1]", config.min_valid_ratio));
        }
        if config.heatmap_size == 0 || !(config.heatmap_sigma_deg > 0.0) {
            return invalid("heatmap size and sigma must be positive");
        }
        Ok(Self { config, ..Self::default() })
    }

    /// Filters, detects and featurises one trial; trials without ratings or
    /// fixations are recorded in [`Corpus::excluded`].
    pub fn ingest(&mut self, trial: &Trial) {
        let key = format!("{}/{}", trial.image_id, trial.subject_id);
        let Some(ratings) = trial.ratings else {
            self.excluded.push(format!("{key}: no ratings"));
            return;
        };
        match process_trial(trial, &self.config) {
            Ok((events, features)) => self.trials.push(TrialRecord {
                image_id: trial.image_id.clone(),
                subject_id: trial.subject_id.clone(),
                ratings,
                events,
                features,
            }),
            Err(reason) => self.excluded.push(format!("{key}: {reason}")),
        }
    }

    pub fn add_map(&mut self, map: SemanticLabelMap) {
        self.maps.insert(map.image_id.clone(), map);
    }

    pub fn add_embeddings(&mut self, set: PatchEmbeddingSet) {
        self.embeddings.insert(set.image_id.clone(), set);
    }

    pub fn image_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.trials.iter().map(|t| t.image_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    fn map(&self, image_id: &str) -> Result<&SemanticLabelMap> {
        self.maps
            .get(image_id)
            .ok_or_else(|| PipelineError::MissingScene { image_id: image_id.into(), what: "semantic label map" })
    }

    fn embedding(&self, image_id: &str) -> Result<&PatchEmbeddingSet> {
        self.embeddings
            .get(image_id)
            .ok_or_else(|| PipelineError::MissingScene { image_id: image_id.into(), what: "patch embeddings" })
    }

    fn heatmap_sigma_px(&self) -> f64 {
        self.config.display.deg_to_px(self.config.heatmap_sigma_deg)
    }

    /// Model input for every trial, in trial order, labelled on `dim`.
    /// `repr` applies to the gaze variants only.
    pub fn inputs(&self, variant: Variant, repr: GazeRepr, dim: Dimension) -> Result<Vec<TokenSequence>> {
        self.trials.iter().map(|t| self.input(t, variant, repr, dim)).collect()
    }

    pub fn input(&self, t: &TrialRecord, variant: Variant, repr: GazeRepr, dim: Dimension) -> Result<TokenSequence> {
        let c = &self.config;
        let fx = &t.events.fixations;
        let (label, meta) = (t.level(dim), t.meta(dim));
        let single = |row: Vec<f64>| Ok(TokenSequence::from_rows(&[row], 0, label, meta.clone())?);
        let grid = &c.patch_grid;
        match variant {
            Variant::GazeOnly => build_fused_sequence(fx, &c.display, Some(repr), SceneInput::None, label, meta),
            Variant::GazeAoi => {
                build_fused_sequence(fx, &c.display, Some(repr), SceneInput::Aoi(self.map(&t.image_id)?), label, meta)
            }
            Variant::GazePatch => {
                let set = self.embedding(&t.image_id)?;
                build_fused_sequence(fx, &c.display, Some(repr), SceneInput::Patch(set, grid), label, meta)
            }
            Variant::AoiSeq => build_fused_sequence(fx, &c.display, None, SceneInput::Aoi(self.map(&t.image_id)?), label, meta),
            Variant::PatchSeq => {
                let set = self.embedding(&t.image_id)?;
                build_fused_sequence(fx, &c.display, None, SceneInput::Patch(set, grid), label, meta)
            }
            Variant::AoiComposition => single(self.map(&t.image_id)?.composition().to_vec()),
            Variant::ImageOnly => single(self.embedding(&t.image_id)?.mean()),
            Variant::GazeWeightedPool => {
                let set = self.embedding(&t.image_id)?;
                let h = fixation_heatmap(fx, &c.display, self.heatmap_sigma_px(), set.grid_rows, set.grid_cols);
                single(set.weighted_mean(&h.data))
            }
            Variant::HeatmapMlp => {
                let n = c.heatmap_size;
                let h = fixation_heatmap(fx, &c.display, self.heatmap_sigma_px(), n, n);
                // cells sum to one; rescale so the mean cell is 1
                let scale = (n * n) as f64;
                single(h.data.iter().map(|v| v * scale).collect())
            }
        }
    }

    /// Feature, AOI-share and level rows for the statistics report.
    pub fn analysis_trials(&self) -> Vec<AnalysisTrial> {
        self.trials
            .iter()
            .map(|t| AnalysisTrial {
                image_id: t.image_id.clone(),
                subject_id: t.subject_id.clone(),
                features: t.features,
                aoi: self.maps.get(&t.image_id).map(|m| aoi_time_share(&t.events.fixations, m, &self.config.display)),
                levels: Dimension::ALL.map(|d| t.level(d)),
            })
            .collect()
    }
}

/// Validity filter, fixation detection and scanpath features for one
/// trial. `Err` carries the reason the trial is unusable.
pub fn process_trial(trial: &Trial, config: &CorpusConfig) -> std::result::Result<(EventSet, FeatureVector), String> {
    let kept = match filter_invalid(trial, config.min_valid_ratio) {
        FilterOutcome::Kept(t) => t,
        FilterOutcome::Rejected { valid_ratio } => {
            return Err(format!("valid ratio {valid_ratio:.3} below {}", config.min_valid_ratio));
        }
    };
    let events = detect_fixations(&kept.samples, &config.idt);
    if events.fixations.is_empty() {
        return Err("no fixations".into());
    }
    let features =
        compute_features(&events.fixations, &events.saccades, trial.span_ms(), &config.feature_grid, &config.display);
    Ok((events, features))
}

/// Architecture for `variant` sized to the given inputs.
pub fn spec_for(variant: Variant, seqs: &[TokenSequence]) -> Result<ModelSpec> {
    let Some(first) = seqs.first() else {
        return invalid("no input sequences");
    };
    Ok(ModelSpec::new(variant, first.gaze_width, first.width - first.gaze_width))
}
