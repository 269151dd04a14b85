use gazeperc_core::{DisplayConfig, PatchGridConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SynthError};

/// How strongly a trial's deviation `δ` shapes its gaze.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeCoupling {
    /// Tilt of the AOI choice towards classes of positive valence.
    pub dwell_tilt: f64,
    /// Log-duration shift per unit `δ`, on every fixation.
    pub duration_gain: f64,
    /// Extra log-duration shift per unit `δ · valence` of the fixated class.
    pub duration_aoi_gain: f64,
    /// Log-duration slope over the trial per unit `δ`: early fixations
    /// lengthen and late ones shorten, leaving the fixation count unchanged.
    pub duration_trend_gain: f64,
    /// Log saccade-amplitude shift per unit `δ`.
    pub saccade_gain: f64,
    /// Per-trial idiosyncratic log-scale offsets of duration and amplitude.
    pub trial_noise_std: f64,
}

impl Default for GazeCoupling {
    fn default() -> Self {
        Self {
            dwell_tilt: 0.0,
            duration_gain: 0.15,
            duration_aoi_gain: 1.5,
            duration_trend_gain: 0.4,
            saccade_gain: 0.3,
            trial_noise_std: 0.2,
        }
    }
}

impl GazeCoupling {
    /// Gaze that ignores `δ` entirely.
    pub fn none() -> Self {
        Self {
            dwell_tilt: 0.0,
            duration_gain: 0.0,
            duration_aoi_gain: 0.0,
            duration_trend_gain: 0.0,
            saccade_gain: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_images: usize,
    pub n_subjects: usize,
    pub raters_per_image: usize,
    /// Weight of the image's consensus component `μ` in the latent `z`.
    pub w_scene: f64,
    /// Weight of the trial's deviation `Δ` in the latent `z`.
    pub w_gaze: f64,
    /// Standard deviation of the rating noise `ε`.
    pub noise_std: f64,
    pub subject_bias_std: f64,
    /// Sign linking the shared deviation `δ` to each dimension's `Δ` (wealthy, safe, boring).
    pub gaze_sign: [f64; 3],
    pub coupling: GazeCoupling,
    pub seed: u64,
    pub display: DisplayConfig,
    pub map_width: usize,
    pub map_height: usize,
    /// Side of the square class blocks the label map is tiled with.
    pub block_px: usize,
    pub patch_grid: PatchGridConfig,
    pub embed_dim: usize,
    pub embed_noise_std: f64,
    /// Expected number of short tracking dropouts per trial.
    pub dropouts_per_trial: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_images: 100,
            n_subjects: 60,
            raters_per_image: 5,
            w_scene: 1.0,
            w_gaze: 1.0,
            noise_std: 0.5,
            subject_bias_std: 0.3,
            gaze_sign: [1.0, 1.0, -1.0],
            coupling: GazeCoupling::default(),
            seed: 0,
            display: DisplayConfig::default(),
            map_width: 160,
            map_height: 110,
            block_px: 10,
            patch_grid: PatchGridConfig::default(),
            embed_dim: 16,
            embed_noise_std: 0.1,
            dropouts_per_trial: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SynthError::Config(m.to_owned()));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if self.n_images == 0 || self.raters_per_image == 0 {
            return bad("n_images and raters_per_image must be positive");
        }
        if self.raters_per_image > self.n_subjects {
            return bad("raters_per_image cannot exceed n_subjects");
        }
        if ![
            self.w_scene,
            self.w_gaze,
            self.noise_std,
            self.subject_bias_std,
            self.embed_noise_std,
            self.dropouts_per_trial,
        ]
        .into_iter()
        .all(nonneg)
        {
            return bad("weights and noise levels must be finite and non-negative");
        }
        let c = &self.coupling;
        if ![
            c.dwell_tilt,
            c.duration_gain,
            c.duration_aoi_gain,
            c.duration_trend_gain,
            c.saccade_gain,
        ]
        .into_iter()
        .all(f64::is_finite)
            || !nonneg(c.trial_noise_std)
            || !self.gaze_sign.iter().all(|s| s.is_finite())
        {
            return bad("gaze coupling must be finite");
        }
        if self.block_px == 0
            || self.map_width % self.block_px != 0
            || self.map_height % self.block_px != 0
        {
            return bad("map dimensions must be positive multiples of block_px");
        }
        if self.embed_dim == 0 || self.patch_grid.n_patches() == 0 {
            return bad("embedding dimension and patch grid must be non-empty");
        }
        if self.patch_grid.grid_cols > self.map_width || self.patch_grid.grid_rows > self.map_height
        {
            return bad("patch grid finer than the label map");
        }
        Ok(())
    }

    /// Standard deviation of `z` implied by the weights.
    pub fn latent_std(&self) -> f64 {
        (self.w_scene.powi(2)
            + self.w_gaze.powi(2)
            + self.subject_bias_std.powi(2)
            + self.noise_std.powi(2))
        .sqrt()
    }

    /// Cut points of the 5-point rating scale on `z`. The inner pair leaves a
    /// third of the mass in each discretised level.
    pub fn rating_thresholds(&self) -> [f64; 4] {
        let s = self.latent_std();
        [
            -0.967_421_566 * s,
            -0.430_727_299 * s,
            0.430_727_299 * s,
            0.967_421_566 * s,
        ]
    }

    pub fn n_trials(&self) -> usize {
        self.n_images * self.raters_per_image
    }
}
