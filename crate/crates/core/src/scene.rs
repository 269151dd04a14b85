//! Fixation-to-scene association: semantic AOI lookup, AOI dwell shares and
//! patch-grid indexing.
//!
//! Fixations outside the image map to the sentinel category
//! [`NONE_CATEGORY`] or to no patch, so scene sequences stay aligned with the
//! gaze sequence.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::display::DisplayConfig;
use crate::error::Result;
use crate::types::{FixationEvent, SemanticLabelMap, CATEGORY_NAMES, NONE_CATEGORY, N_CATEGORIES};

/// Category under a display point, or [`NONE_CATEGORY`] off the image.
pub fn aoi_at(map: &SemanticLabelMap, x_px: f64, y_px: f64, display: &DisplayConfig) -> u8 {
    if !display.contains(x_px, y_px) {
        return NONE_CATEGORY;
    }
    let col = ((x_px / display.width_px) * map.width as f64).floor() as usize;
    let row = ((y_px / display.height_px) * map.height as f64).floor() as usize;
    map.get(col.min(map.width - 1), row.min(map.height - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoiShares {
    pub shares: [f64; N_CATEGORIES],
    /// No fixation landed on the image.
    pub degenerate: bool,
}

/// Fraction of in-image fixation time spent on each category.
pub fn aoi_time_share(fixations: &[FixationEvent], map: &SemanticLabelMap, display: &DisplayConfig) -> AoiShares {
    let mut mass = [0.0; N_CATEGORIES];
    for f in fixations {
        let c = aoi_at(map, f.cx_px, f.cy_px, display);
        if c != NONE_CATEGORY {
            mass[c as usize] += f.duration_ms;
        }
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        AoiShares { shares: mass.map(|m| m / total), degenerate: false }
    } else {
        AoiShares { shares: [0.0; N_CATEGORIES], degenerate: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGridConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for PatchGridConfig {
    fn default() -> Self {
        Self { grid_rows: 14, grid_cols: 14 }
    }
}

impl PatchGridConfig {
    pub fn n_patches(&self) -> usize {
        self.grid_rows * self.grid_cols
    }
}

/// Row-major patch index under a display point; `None` off the display.
pub fn patch_index(x_px: f64, y_px: f64, display: &DisplayConfig, grid: &PatchGridConfig) -> Option<usize> {
    if !display.contains(x_px, y_px) {
        return None;
    }
    let cell = |v: f64, extent: f64, n: usize| {
        let u = (v / extent).clamp(0.0, 1.0 - f64::EPSILON);
        ((u * n as f64).floor() as usize).min(n - 1)
    };
    let row = cell(y_px, display.height_px, grid.grid_rows);
    let col = cell(x_px, display.width_px, grid.grid_cols);
    Some(row * grid.grid_cols + col)
}

/// Writes per-trial AOI shares with category names as headers.
pub fn write_aoi_csv<'a, W: Write>(
    writer: W,
    rows: impl IntoIterator<Item = (&'a str, &'a str, &'a AoiShares)>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id", "subject_id"];
    header.extend(CATEGORY_NAMES);
    header.push("degenerate");
    wtr.write_record(&header)?;
    for (image_id, subject_id, s) in rows {
        let mut rec = vec![image_id.to_owned(), subject_id.to_owned()];
        rec.extend(s.shares.iter().map(|v| v.to_string()));
        rec.push((s.degenerate as u8).to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}
