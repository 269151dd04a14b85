//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Nominal tracker sampling interval (600 Hz).
pub const SAMPLE_INTERVAL_MS: f64 = 1000.0 / 600.0;

/// Nominal viewing time per trial.
pub const TRIAL_SPAN_MS: f64 = 7000.0;

/// Number of semantic scene categories.
pub const N_CATEGORIES: usize = 19;

/// Category id used for fixations that fall outside the image.
pub const NONE_CATEGORY: u8 = 19;

/// Category names indexed by id.
pub const CATEGORY_NAMES: [&str; N_CATEGORIES] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

/// Upper bound on the number of tokens in a sequence.
pub const MAX_SEQ_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub onset_ms: f64,
    pub offset_ms: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub duration_ms: f64,
    /// Distance to the next fixation centroid, 0 for the last fixation.
    pub next_saccade_len_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaccadeEvent {
    pub onset_ms: f64,
    pub offset_ms: f64,
    /// Centroid-to-centroid distance of the bounding fixations.
    pub amplitude_px: f64,
    pub duration_ms: f64,
}

/// Rated perception dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Wealthy,
    Safe,
    Boring,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Wealthy, Dimension::Safe, Dimension::Boring];

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Wealthy => "wealthy",
            Dimension::Safe => "safe",
            Dimension::Boring => "boring",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dimension {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wealthy" | "wealth" => Ok(Dimension::Wealthy),
            "safe" | "safety" => Ok(Dimension::Safe),
            "boring" | "boredom" => Ok(Dimension::Boring),
            other => Err(CoreError::Validation(format!("unknown dimension '{other}'"))),
        }
    }
}

/// Likert scores (1..=5) for the three dimensions of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratings {
    pub wealthy: u8,
    pub safe: u8,
    pub boring: u8,
}

impl Ratings {
    pub fn new(wealthy: u8, safe: u8, boring: u8) -> Result<Self> {
        for (dim, s) in Dimension::ALL.iter().zip([wealthy, safe, boring]) {
            if !(1..=5).contains(&s) {
                return Err(CoreError::Validation(format!("{dim} score {s} outside 1..=5")));
            }
        }
        Ok(Self { wealthy, safe, boring })
    }

    pub fn get(&self, dim: Dimension) -> u8 {
        match dim {
            Dimension::Wealthy => self.wealthy,
            Dimension::Safe => self.safe,
            Dimension::Boring => self.boring,
        }
    }

    pub fn level(&self, dim: Dimension) -> PerceptionLevel {
        // scores are validated on construction
        discretize_rating(self.get(dim)).expect("validated score")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PerceptionLevel {
    Low = 0,
    Neutral = 1,
    High = 2,
}

impl PerceptionLevel {
    pub const ALL: [PerceptionLevel; 3] =
        [PerceptionLevel::Low, PerceptionLevel::Neutral, PerceptionLevel::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PerceptionLevel::Low => "Low",
            PerceptionLevel::Neutral => "Neutral",
            PerceptionLevel::High => "High",
        }
    }
}

/// Maps a 5-point score to Low (1, 2), Neutral (3) or High (4, 5).
pub fn discretize_rating(score: u8) -> Result<PerceptionLevel> {
    match score {
        1 | 2 => Ok(PerceptionLevel::Low),
        3 => Ok(PerceptionLevel::Neutral),
        4 | 5 => Ok(PerceptionLevel::High),
        s => Err(CoreError::Validation(format!("rating {s} outside 1..=5"))),
    }
}

/// One subject viewing one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub image_id: String,
    pub subject_id: String,
    /// Absent until joined with the ratings file.
    pub ratings: Option<Ratings>,
    pub samples: Vec<GazeSample>,
    pub display_w_px: f64,
    pub display_h_px: f64,
}

impl Trial {
    pub fn key(&self) -> (&str, &str) {
        (&self.image_id, &self.subject_id)
    }

    /// Time between the first and last sample.
    pub fn span_ms(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t_ms - a.t_ms,
            _ => 0.0,
        }
    }

    pub fn valid_ratio(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.valid).count() as f64 / self.samples.len() as f64
    }
}

/// Result of validity filtering.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterOutcome {
    Kept(Trial),
    Rejected { valid_ratio: f64 },
}

/// Drops invalid samples, rejecting the trial when too few samples are valid.
///
/// Empty trials are rejected.
pub fn filter_invalid(trial: &Trial, min_valid_ratio: f64) -> FilterOutcome {
    let valid_ratio = trial.valid_ratio();
    if trial.samples.is_empty() || valid_ratio < min_valid_ratio {
        return FilterOutcome::Rejected { valid_ratio };
    }
    let mut kept = trial.clone();
    kept.samples.retain(|s| s.valid);
    FilterOutcome::Kept(kept)
}

/// Per-pixel semantic category grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLabelMap {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

impl SemanticLabelMap {
    pub fn new(image_id: impl Into<String>, width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(CoreError::Validation("label map must be non-empty".into()));
        }
        if labels.len() != width * height {
            return Err(CoreError::Validation(format!(
                "label map has {} entries, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= N_CATEGORIES) {
            return Err(CoreError::Validation(format!("label {bad} is not a category id")));
        }
        Ok(Self { image_id: image_id.into(), width, height, labels })
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Pixel fraction of each category.
    pub fn composition(&self) -> [f64; N_CATEGORIES] {
        let mut counts = [0usize; N_CATEGORIES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        let n = self.labels.len() as f64;
        counts.map(|c| c as f64 / n)
    }
}

/// Patch-level visual embeddings on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchEmbeddingSet {
    pub image_id: String,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub embed_dim: usize,
    /// `grid_rows * grid_cols` rows of `embed_dim` values.
    pub data: Vec<f64>,
}

impl PatchEmbeddingSet {
    pub fn new(
        image_id: impl Into<String>,
        grid_rows: usize,
        grid_cols: usize,
        embed_dim: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != grid_rows * grid_cols * embed_dim {
            return Err(CoreError::Validation(format!(
                "embedding set has {} values, expected {}x{}x{}",
                data.len(),
                grid_rows,
                grid_cols,
                embed_dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Validation("embedding values must be finite".into()));
        }
        Ok(Self { image_id: image_id.into(), grid_rows, grid_cols, embed_dim, data })
    }

    pub fn n_patches(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    pub fn row(&self, patch: usize) -> &[f64] {
        &self.data[patch * self.embed_dim..(patch + 1) * self.embed_dim]
    }

    /// Unweighted mean over all patches.
    pub fn mean(&self) -> Vec<f64> {
        let uniform = vec![1.0 / self.n_patches() as f64; self.n_patches()];
        self.weighted_mean(&uniform)
    }

    /// Weighted patch average; `weights` must sum to one.
    pub fn weighted_mean(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_patches(), "one weight per patch");
        let mut out = vec![0.0; self.embed_dim];
        for (p, &w) in weights.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(self.row(p)) {
                *o += w * v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub image_id: String,
    pub subject_id: String,
    pub dimension: Dimension,
}

/// Masked token matrix for one trial, ready to batch.
///
/// Columns `0..gaze_width` hold the gaze part of each token and the remaining
/// columns the scene part (if any).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    /// Row-major `len() x width` values.
    pub tokens: Vec<f64>,
    pub width: usize,
    pub gaze_width: usize,
    /// `true` marks a real event, `false` padding.
    pub mask: Vec<bool>,
    pub label: PerceptionLevel,
    pub meta: SequenceMeta,
}

impl TokenSequence {
    /// Builds an unpadded sequence from token rows.
    pub fn from_rows(
        rows: &[Vec<f64>],
        gaze_width: usize,
        label: PerceptionLevel,
        meta: SequenceMeta,
    ) -> Result<Self> {
        let width = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| CoreError::Validation("token sequence needs at least one token".into()))?;
        if rows.len() > MAX_SEQ_LEN {
            return Err(CoreError::Validation(format!(
                "{} tokens exceeds the maximum of {MAX_SEQ_LEN}",
                rows.len()
            )));
        }
        if rows.iter().any(|r| r.len() != width) || gaze_width > width {
            return Err(CoreError::Validation("ragged token rows".into()));
        }
        Ok(Self {
            tokens: rows.concat(),
            width,
            gaze_width,
            mask: vec![true; rows.len()],
            label,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn n_valid(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.tokens[i * self.width..(i + 1) * self.width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.tokens[i * self.width..(i + 1) * self.width]
    }

    /// Appends zero rows with a false mask up to `len`.
    pub fn pad_to(&mut self, len: usize) {
        while self.mask.len() < len {
            self.tokens.extend(std::iter::repeat(0.0).take(self.width));
            self.mask.push(false);
        }
    }

    /// Checks the padding and length invariants.
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.mask.len() * self.width {
            return Err(CoreError::Validation("token buffer does not match mask".into()));
        }
        if self.len() > MAX_SEQ_LEN {
            return Err(CoreError::Validation("sequence longer than the maximum".into()));
        }
        if self.n_valid() == 0 {
            return Err(CoreError::Validation("sequence has no unmasked token".into()));
        }
        for (i, &m) in self.mask.iter().enumerate() {
            if !m && self.row(i).iter().any(|&v| v != 0.0) {
                return Err(CoreError::Validation(format!("padded row {i} is not zero")));
            }
        }
        Ok(())
    }
}
