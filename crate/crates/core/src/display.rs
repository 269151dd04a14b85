//! Fixed-monitor display geometry.

use serde::{Deserialize, Serialize};

/// Screen geometry used for degree/pixel conversion.
///
/// Defaults describe a 24-inch monitor showing 1600×1100 stimuli at 650 mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayConfig {
    pub width_px: f64,
    pub height_px: f64,
    pub viewing_distance_mm: f64,
    pub pixel_pitch_mm: f64,
}

impl Default for DisplayConfig {
    fn default() -> Self {
        Self {
            width_px: 1600.0,
            height_px: 1100.0,
            viewing_distance_mm: 650.0,
            pixel_pitch_mm: 0.27,
        }
    }
}

impl DisplayConfig {
    /// Pixels subtended by a visual angle centered on the line of sight.
    pub fn deg_to_px(&self, deg: f64) -> f64 {
        let half = (deg.to_radians() / 2.0).tan();
        2.0 * self.viewing_distance_mm * half / self.pixel_pitch_mm
    }

    pub fn px_to_deg(&self, px: f64) -> f64 {
        let mm = px * self.pixel_pitch_mm;
        (2.0 * (mm / (2.0 * self.viewing_distance_mm)).atan()).to_degrees()
    }

    pub fn diagonal_px(&self) -> f64 {
        self.width_px.hypot(self.height_px)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x < self.width_px && y < self.height_px
    }
}
