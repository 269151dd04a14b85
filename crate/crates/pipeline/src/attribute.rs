//! Integrated-gradients summaries over a set of trials: per-token scores
//! pooled by AOI category and by patch-grid cell.

use gazeperc_core::{patch_index, TokenSequence, NONE_CATEGORY, N_CATEGORIES};
use gazeperc_nn::{integrated_gradients, Model, Variant};
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{invalid, Result};
use crate::train::predict;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSummary {
    pub variant: Variant,
    pub steps: usize,
    pub n_sequences: usize,
    /// Largest |Σ attributions - (logit(x) - logit(baseline))| seen.
    pub max_completeness_gap: f64,
    /// Mean per-token score by AOI id (19 categories, then off-image), for
    /// variants with AOI tokens; categories never fixated are 0.
    pub by_aoi: Option<Vec<f64>>,
    pub aoi_counts: Option<Vec<usize>>,
    /// Summed per-token score per patch cell, row-major, normalised to sum to one.
    pub patch_grid: Vec<f64>,
    pub grid_rows: usize,
    pub grid_cols: usize,
}

/// Attributes the predicted class of each listed trial. `seqs` must be the
/// model inputs aligned with `corpus.trials`.
pub fn attribute(
    corpus: &Corpus,
    model: &Model,
    seqs: &[TokenSequence],
    trials: &[usize],
    steps: usize,
) -> Result<AttributionSummary> {
    if seqs.len() != corpus.trials.len() {
        return invalid("inputs are not aligned with the corpus trials");
    }
    if model.spec.variant.is_mlp() {
        return invalid(format!("{} takes a single pooled token; nothing to attribute per token", model.spec.variant));
    }
    let grid = corpus.config.patch_grid;
    let aoi_col = match model.spec.variant {
        Variant::GazeAoi => Some(model.spec.gaze_width),
        Variant::AoiSeq => Some(0),
        _ => None,
    };
    let mut by_aoi = vec![0.0; N_CATEGORIES + 1];
    let mut aoi_counts = vec![0usize; N_CATEGORIES + 1];
    let mut cells = vec![0.0; grid.n_patches()];
    let mut gap = 0.0f64;
    let picked: Vec<&TokenSequence> = trials.iter().map(|&i| &seqs[i]).collect();
    let preds = predict(model, &picked)?;
    for (&i, &target) in trials.iter().zip(&preds) {
        let seq = &seqs[i];
        let a = integrated_gradients(model, seq, None, steps, target)?;
        gap = gap.max(a.completeness_gap());
        let fixations = &corpus.trials[i].events.fixations;
        for (t, &score) in a.per_token.iter().enumerate() {
            if !seq.mask[t] {
                continue;
            }
            if let Some(col) = aoi_col {
                let id = (seq.row(t)[col] as usize).min(NONE_CATEGORY as usize);
                by_aoi[id] += score;
                aoi_counts[id] += 1;
            }
            let f = &fixations[t];
            if let Some(p) = patch_index(f.cx_px, f.cy_px, &corpus.config.display, &grid) {
                cells[p] += score;
            }
        }
    }
    let total: f64 = cells.iter().sum();
    if total > 0.0 {
        cells.iter_mut().for_each(|c| *c /= total);
    }
    let by_aoi = aoi_col.map(|_| by_aoi.iter().zip(&aoi_counts).map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 }).collect());
    Ok(AttributionSummary {
        variant: model.spec.variant,
        steps,
        n_sequences: trials.len(),
        max_completeness_gap: gap,
        by_aoi,
        aoi_counts: aoi_col.map(|_| aoi_counts),
        patch_grid: cells,
        grid_rows: grid.grid_rows,
        grid_cols: grid.grid_cols,
    })
}
