//! Token construction: raw gaze rows per fixation, optionally paired with
//! the scene under the fixation (an AOI id or a patch embedding).

use std::fmt;
use std::str::FromStr;

use gazeperc_core::{
    aoi_at, patch_index, DisplayConfig, FixationEvent, PatchEmbeddingSet, PatchGridConfig, PerceptionLevel,
    SemanticLabelMap, SequenceMeta, TokenSequence, MAX_SEQ_LEN,
};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, PipelineError, Result};

/// Which fixation attributes make up a gaze token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GazeRepr {
    /// Normalised centroid.
    #[serde(rename = "xy")]
    Xy,
    /// Centroid and duration in seconds.
    #[serde(rename = "xy+dur")]
    XyDur,
    /// Centroid, duration and outgoing saccade length over the display diagonal.
    #[serde(rename = "xy+dur+sacc")]
    XyDurSacc,
}

impl GazeRepr {
    pub const ALL: [GazeRepr; 3] = [GazeRepr::Xy, GazeRepr::XyDur, GazeRepr::XyDurSacc];

    pub fn width(self) -> usize {
        match self {
            GazeRepr::Xy => 2,
            GazeRepr::XyDur => 3,
            GazeRepr::XyDurSacc => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GazeRepr::Xy => "xy",
            GazeRepr::XyDur => "xy+dur",
            GazeRepr::XyDurSacc => "xy+dur+sacc",
        }
    }
}

impl fmt::Display for GazeRepr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GazeRepr {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self> {
        GazeRepr::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| PipelineError::Validation(format!("unknown gaze representation '{s}' (xy, xy+dur, xy+dur+sacc)")))
    }
}

/// One gaze row per fixation, earliest first, capped at [`MAX_SEQ_LEN`].
pub fn build_gaze_tokens(fixations: &[FixationEvent], display: &DisplayConfig, repr: GazeRepr) -> Result<Vec<Vec<f64>>> {
    if fixations.is_empty() {
        return invalid("trial has no fixations");
    }
    let diag = display.diagonal_px();
    Ok(fixations
        .iter()
        .take(MAX_SEQ_LEN)
        .map(|f| {
            let mut row = vec![f.cx_px / display.width_px, f.cy_px / display.height_px];
            if repr != GazeRepr::Xy {
                row.push(f.duration_ms / 1000.0);
            }
            if repr == GazeRepr::XyDurSacc {
                row.push(f.next_saccade_len_px / diag);
            }
            row
        })
        .collect())
}

/// Scene half of a fused token.
#[derive(Debug, Clone, Copy)]
pub enum SceneInput<'a> {
    None,
    /// AOI id under each fixation, [`gazeperc_core::NONE_CATEGORY`] off the image.
    Aoi(&'a SemanticLabelMap),
    /// Embedding of the patch under each fixation plus an off-image flag.
    Patch(&'a PatchEmbeddingSet, &'a PatchGridConfig),
}

impl SceneInput<'_> {
    pub fn width(&self) -> usize {
        match self {
            SceneInput::None => 0,
            SceneInput::Aoi(_) => 1,
            SceneInput::Patch(set, _) => set.embed_dim + 1,
        }
    }

    fn row(&self, f: &FixationEvent, display: &DisplayConfig) -> Vec<f64> {
        match *self {
            SceneInput::None => Vec::new(),
            SceneInput::Aoi(map) => vec![f64::from(aoi_at(map, f.cx_px, f.cy_px, display))],
            SceneInput::Patch(set, grid) => match patch_index(f.cx_px, f.cy_px, display, grid) {
                Some(p) => {
                    let mut row = set.row(p).to_vec();
                    row.push(0.0);
                    row
                }
                None => {
                    let mut row = vec![0.0; set.embed_dim];
                    row.push(1.0);
                    row
                }
            },
        }
    }
}

/// Aligned gaze/scene tokens for one trial. `repr = None` drops the gaze
/// half (scene-only sequences).
pub fn build_fused_sequence(
    fixations: &[FixationEvent],
    display: &DisplayConfig,
    repr: Option<GazeRepr>,
    scene: SceneInput<'_>,
    label: PerceptionLevel,
    meta: SequenceMeta,
) -> Result<TokenSequence> {
    if let SceneInput::Patch(set, grid) = scene {
        if set.grid_rows != grid.grid_rows || set.grid_cols != grid.grid_cols {
            return invalid(format!(
                "embedding grid {}x{} of '{}' does not match the configured {}x{}",
                set.grid_rows, set.grid_cols, set.image_id, grid.grid_rows, grid.grid_cols
            ));
        }
    }
    if repr.is_none() && matches!(scene, SceneInput::None) {
        return invalid("a sequence needs a gaze or a scene half");
    }
    let gaze = match repr {
        Some(r) => build_gaze_tokens(fixations, display, r)?,
        None if fixations.is_empty() => return invalid("trial has no fixations"),
        None => vec![Vec::new(); fixations.len().min(MAX_SEQ_LEN)],
    };
    let gaze_width = repr.map_or(0, GazeRepr::width);
    let rows: Vec<Vec<f64>> = gaze
        .into_iter()
        .zip(fixations)
        .map(|(mut row, f)| {
            row.extend(scene.row(f, display));
            row
        })
        .collect();
    Ok(TokenSequence::from_rows(&rows, gaze_width, label, meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gazeperc_core::Dimension;

    fn fix(x: f64, y: f64, dur: f64, sacc: f64) -> FixationEvent {
        FixationEvent { onset_ms: 0.0, offset_ms: dur, cx_px: x, cy_px: y, duration_ms: dur, next_saccade_len_px: sacc }
    }

    fn meta() -> SequenceMeta {
        SequenceMeta { image_id: "a".into(), subject_id: "s".into(), dimension: Dimension::Safe }
    }

    #[test]
    fn centre_fixation_row() {
        let d = DisplayConfig::default();
        let rows = build_gaze_tokens(&[fix(d.width_px / 2.0, d.height_px / 2.0, 500.0, 0.0)], &d, GazeRepr::XyDurSacc).unwrap();
        assert_eq!(rows, vec![vec![0.5, 0.5, 0.5, 0.0]]);
        let rows = build_gaze_tokens(&[fix(10.0, 10.0, 100.0, 5.0)], &d, GazeRepr::Xy).unwrap();
        assert_eq!(rows[0].len(), 2);
    }

    #[test]
    fn cap_and_empty() {
        let d = DisplayConfig::default();
        let many: Vec<_> = (0..80).map(|i| fix(i as f64, 1.0, 100.0, 1.0)).collect();
        let rows = build_gaze_tokens(&many, &d, GazeRepr::XyDur).unwrap();
        assert_eq!(rows.len(), 64);
        assert_eq!(rows[63][0], 63.0 / d.width_px);
        assert!(build_gaze_tokens(&[], &d, GazeRepr::Xy).is_err());
    }

    #[test]
    fn vegetation_map_gives_id_8() {
        let d = DisplayConfig::default();
        let map = SemanticLabelMap::new("a", 4, 3, vec![8; 12]).unwrap();
        let fx = [fix(100.0, 100.0, 200.0, 50.0), fix(900.0, 500.0, 300.0, 0.0), fix(-5.0, 10.0, 300.0, 0.0)];
        let seq =
            build_fused_sequence(&fx, &d, Some(GazeRepr::XyDur), SceneInput::Aoi(&map), PerceptionLevel::Low, meta()).unwrap();
        assert_eq!(seq.width, 4);
        assert_eq!(seq.gaze_width, 3);
        assert_eq!(seq.row(0)[3], 8.0);
        assert_eq!(seq.row(1)[3], 8.0);
        assert_eq!(seq.row(2)[3], 19.0);
    }

    #[test]
    fn patch_tokens_in_one_patch_are_equal() {
        let d = DisplayConfig::default();
        let grid = PatchGridConfig { grid_rows: 2, grid_cols: 2 };
        let set = PatchEmbeddingSet::new("a", 2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        let fx = [fix(10.0, 10.0, 200.0, 5.0), fix(12.0, 14.0, 250.0, 5.0), fix(11.0, 9.0, 150.0, 0.0)];
        let seq = build_fused_sequence(&fx, &d, None, SceneInput::Patch(&set, &grid), PerceptionLevel::High, meta()).unwrap();
        assert_eq!(seq.gaze_width, 0);
        assert_eq!(seq.width, 4);
        assert!((0..3).all(|i| seq.row(i) == [0.0, 1.0, 2.0, 0.0]));
    }
}
