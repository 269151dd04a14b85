//! Scanpath-level gaze features and fixation heatmaps.
//!
//! Spreads use the population convention (divide by n). Entropy is the
//! Shannon entropy in nats of fixation counts over a regular display grid.
//! Dispersion here is the mean distance of fixation centroids to their grand
//! centroid, unrelated to the I-DT window dispersion.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::display::DisplayConfig;
use crate::error::Result;
use crate::types::{FixationEvent, SaccadeEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub grid_rows: usize,
    pub grid_cols: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { grid_rows: 10, grid_cols: 10 }
    }
}

/// The 21 scanpath features. Durations in ms, distances in px.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub fixation_dispersion: f64,
    pub saccade_count: f64,
    pub fixation_count: f64,
    pub fixation_entropy: f64,
    pub saccade_amplitude_mean: f64,
    pub saccade_duration_percentage: f64,
    pub time_to_first_fixation: f64,
    pub fixation_duration_mean: f64,
    pub fixation_scanpath_length: f64,
    pub fixation_duration_max: f64,
    pub fixation_duration_std: f64,
    pub total_fixation_duration: f64,
    pub fixation_duration_percentage: f64,
    pub fixation_duration_var: f64,
    pub saccade_duration_max: f64,
    pub saccade_duration_std: f64,
    pub saccade_duration_mean: f64,
    pub saccade_duration_var: f64,
    pub saccade_amplitude_var: f64,
    pub saccade_amplitude_std: f64,
    pub saccade_amplitude_max: f64,
    /// Set when the trial had no fixations.
    #[serde(skip)]
    pub degenerate: bool,
}

impl FeatureVector {
    pub const LEN: usize = 21;

    pub const NAMES: [&'static str; 21] = [
        "fixation_dispersion",
        "saccade_count",
        "fixation_count",
        "fixation_entropy",
        "saccade_amplitude_mean",
        "saccade_duration_percentage",
        "time_to_first_fixation",
        "fixation_duration_mean",
        "fixation_scanpath_length",
        "fixation_duration_max",
        "fixation_duration_std",
        "total_fixation_duration",
        "fixation_duration_percentage",
        "fixation_duration_var",
        "saccade_duration_max",
        "saccade_duration_std",
        "saccade_duration_mean",
        "saccade_duration_var",
        "saccade_amplitude_var",
        "saccade_amplitude_std",
        "saccade_amplitude_max",
    ];

    /// Values in [`Self::NAMES`] order.
    pub fn to_array(&self) -> [f64; 21] {
        [
            self.fixation_dispersion,
            self.saccade_count,
            self.fixation_count,
            self.fixation_entropy,
            self.saccade_amplitude_mean,
            self.saccade_duration_percentage,
            self.time_to_first_fixation,
            self.fixation_duration_mean,
            self.fixation_scanpath_length,
            self.fixation_duration_max,
            self.fixation_duration_std,
            self.total_fixation_duration,
            self.fixation_duration_percentage,
            self.fixation_duration_var,
            self.saccade_duration_max,
            self.saccade_duration_std,
            self.saccade_duration_mean,
            self.saccade_duration_var,
            self.saccade_amplitude_var,
            self.saccade_amplitude_std,
            self.saccade_amplitude_max,
        ]
    }
}

/// Mean, max, population std and variance of a sample (all zero when empty).
#[derive(Debug, Clone, Copy, Default)]
struct Summary {
    sum: f64,
    mean: f64,
    max: f64,
    std: f64,
    var: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> Summary {
    let n = values.clone().count();
    if n == 0 {
        return Summary::default();
    }
    let sum: f64 = values.clone().sum();
    let mean = sum / n as f64;
    let var = values.clone().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    Summary { sum, mean, max, std: var.sqrt(), var }
}

fn grid_cell(x: f64, extent: f64, cells: usize) -> usize {
    let f = (x / extent * cells as f64).floor();
    f.clamp(0.0, (cells - 1) as f64) as usize
}

pub fn compute_features(
    fixations: &[FixationEvent],
    saccades: &[SaccadeEvent],
    trial_duration_ms: f64,
    grid: &FeatureConfig,
    display: &DisplayConfig,
) -> FeatureVector {
    let mut fv = FeatureVector {
        fixation_count: fixations.len() as f64,
        saccade_count: saccades.len() as f64,
        degenerate: fixations.is_empty(),
        ..Default::default()
    };

    let fd = summarize(fixations.iter().map(|f| f.duration_ms));
    fv.fixation_duration_mean = fd.mean;
    fv.fixation_duration_max = fd.max;
    fv.fixation_duration_std = fd.std;
    fv.fixation_duration_var = fd.var;
    fv.total_fixation_duration = fd.sum;

    let sd = summarize(saccades.iter().map(|s| s.duration_ms));
    fv.saccade_duration_mean = sd.mean;
    fv.saccade_duration_max = sd.max;
    fv.saccade_duration_std = sd.std;
    fv.saccade_duration_var = sd.var;

    let sa = summarize(saccades.iter().map(|s| s.amplitude_px));
    fv.saccade_amplitude_mean = sa.mean;
    fv.saccade_amplitude_max = sa.max;
    fv.saccade_amplitude_std = sa.std;
    fv.saccade_amplitude_var = sa.var;

    if trial_duration_ms > 0.0 {
        fv.fixation_duration_percentage = fd.sum / trial_duration_ms;
        fv.saccade_duration_percentage = sd.sum / trial_duration_ms;
    }

    if let Some(first) = fixations.first() {
        fv.time_to_first_fixation = first.onset_ms;

        fv.fixation_scanpath_length = fixations
            .windows(2)
            .map(|w| (w[1].cx_px - w[0].cx_px).hypot(w[1].cy_px - w[0].cy_px))
            .sum();

        let n = fixations.len() as f64;
        let gx = fixations.iter().map(|f| f.cx_px).sum::<f64>() / n;
        let gy = fixations.iter().map(|f| f.cy_px).sum::<f64>() / n;
        fv.fixation_dispersion =
            fixations.iter().map(|f| (f.cx_px - gx).hypot(f.cy_px - gy)).sum::<f64>() / n;

        let mut counts = vec![0usize; grid.grid_rows * grid.grid_cols];
        for f in fixations {
            let r = grid_cell(f.cy_px, display.height_px, grid.grid_rows);
            let c = grid_cell(f.cx_px, display.width_px, grid.grid_cols);
            counts[r * grid.grid_cols + c] += 1;
        }
        fv.fixation_entropy = counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum::<f64>()
            .max(0.0);
    }
    fv
}

/// Normalized spatial fixation density on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell weights summing to one.
    pub data: Vec<f64>,
    /// Set when there were no fixations and the map is uniform.
    pub degenerate: bool,
}

impl Heatmap {
    pub fn argmax(&self) -> (usize, usize) {
        let (i, _) = self
            .data
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (i / self.cols, i % self.cols)
    }
}

/// Duration-weighted isotropic Gaussians at fixation centroids, evaluated at
/// cell centers of an `out_rows x out_cols` grid spanning the display.
pub fn fixation_heatmap(
    fixations: &[FixationEvent],
    display: &DisplayConfig,
    sigma_px: f64,
    out_rows: usize,
    out_cols: usize,
) -> Heatmap {
    let cells = out_rows * out_cols;
    let uniform = || Heatmap { rows: out_rows, cols: out_cols, data: vec![1.0 / cells as f64; cells], degenerate: true };
    if fixations.is_empty() {
        return uniform();
    }
    let inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
    let mut data = vec![0.0; cells];
    for r in 0..out_rows {
        let y = (r as f64 + 0.5) * display.height_px / out_rows as f64;
        for c in 0..out_cols {
            let x = (c as f64 + 0.5) * display.width_px / out_cols as f64;
            data[r * out_cols + c] = fixations
                .iter()
                .map(|f| {
                    let d2 = (x - f.cx_px).powi(2) + (y - f.cy_px).powi(2);
                    f.duration_ms * (-d2 * inv2s2).exp()
                })
                .sum();
        }
    }
    let total: f64 = data.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        // every Gaussian underflowed
        return uniform();
    }
    data.iter_mut().for_each(|v| *v /= total);
    Heatmap { rows: out_rows, cols: out_cols, data, degenerate: false }
}

/// One row of the feature export.
pub struct FeatureRow<'a> {
    pub image_id: &'a str,
    pub subject_id: &'a str,
    pub features: &'a FeatureVector,
    /// Discretized levels (0/1/2) for wealthy, safe, boring.
    pub levels: Option<[usize; 3]>,
}

/// Writes one row per trial: ids, the 21 features, then the three level labels.
pub fn export_features_csv<'a, W: Write>(writer: W, rows: impl IntoIterator<Item = FeatureRow<'a>>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["image_id", "subject_id"];
    header.extend(FeatureVector::NAMES);
    header.extend(["wealthy", "safe", "boring"]);
    wtr.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.image_id.to_owned(), row.subject_id.to_owned()];
        rec.extend(row.features.to_array().iter().map(|v| v.to_string()));
        match row.levels {
            Some(l) => rec.extend(l.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat(String::new()).take(3)),
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix(x: f64, y: f64, onset: f64, dur: f64) -> FixationEvent {
        FixationEvent { onset_ms: onset, offset_ms: onset + dur, cx_px: x, cy_px: y, duration_ms: dur, next_saccade_len_px: 0.0 }
    }

    #[test]
    fn single_central_fixation() {
        let d = DisplayConfig::default();
        let fv = compute_features(&[fix(800.0, 550.0, 0.0, 7000.0)], &[], 7000.0, &FeatureConfig::default(), &d);
        assert_eq!(fv.fixation_count, 1.0);
        assert_eq!(fv.fixation_dispersion, 0.0);
        assert_eq!(fv.fixation_entropy, 0.0);
        assert_eq!(fv.fixation_scanpath_length, 0.0);
        assert_eq!(fv.fixation_duration_percentage, 1.0);
        assert!(!fv.degenerate);
    }

    #[test]
    fn two_fixation_hand_case() {
        let d = DisplayConfig::default();
        let fixes = [fix(0.0, 0.0, 0.0, 100.0), fix(300.0, 400.0, 150.0, 300.0)];
        let sacc = [SaccadeEvent { onset_ms: 100.0, offset_ms: 150.0, amplitude_px: 500.0, duration_ms: 50.0 }];
        let fv = compute_features(&fixes, &sacc, 1000.0, &FeatureConfig::default(), &d);
        assert_eq!(fv.fixation_scanpath_length, 500.0);
        assert_eq!(fv.fixation_duration_mean, 200.0);
        // population: ((100-200)^2 + (300-200)^2) / 2 = 10000
        assert_eq!(fv.fixation_duration_var, 10000.0);
        assert_eq!(fv.fixation_duration_std, 100.0);
        assert_eq!(fv.total_fixation_duration, 400.0);
        assert_eq!(fv.fixation_duration_percentage, 0.4);
        assert_eq!(fv.saccade_duration_percentage, 0.05);
        assert_eq!(fv.saccade_amplitude_mean, 500.0);
        assert_eq!(fv.saccade_amplitude_var, 0.0);
        // both centroids are 250 px from (150, 200)
        assert_eq!(fv.fixation_dispersion, 250.0);
        assert!((fv.fixation_entropy - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn one_fixation_per_cell_has_max_entropy() {
        let d = DisplayConfig::default();
        let mut fixes = Vec::new();
        for r in 0..10 {
            for c in 0..10 {
                fixes.push(fix((c as f64 + 0.5) * 160.0, (r as f64 + 0.5) * 110.0, 0.0, 100.0));
            }
        }
        let fv = compute_features(&fixes, &[], 7000.0, &FeatureConfig::default(), &d);
        assert!((fv.fixation_entropy - 100f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn no_fixations_is_degenerate_zero() {
        let fv = compute_features(&[], &[], 7000.0, &FeatureConfig::default(), &DisplayConfig::default());
        assert!(fv.degenerate);
        assert!(fv.to_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn heatmap_peak_and_normalization() {
        let d = DisplayConfig::default();
        let h = fixation_heatmap(&[fix(410.0, 900.0, 0.0, 300.0)], &d, 84.0, 64, 64);
        let (r, c) = h.argmax();
        assert_eq!((r, c), ((900.0 / 1100.0 * 64.0) as usize, (410.0 / 1600.0 * 64.0) as usize));
        assert!((h.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let empty = fixation_heatmap(&[], &d, 84.0, 4, 4);
        assert!(empty.degenerate);
        assert!(empty.data.iter().all(|&v| v == 1.0 / 16.0));
    }

    #[test]
    fn heatmap_mirror_symmetry() {
        let d = DisplayConfig::default();
        let fixes = [fix(300.0, 400.0, 0.0, 200.0), fix(1300.0, 400.0, 300.0, 200.0)];
        let h = fixation_heatmap(&fixes, &d, 84.0, 64, 64);
        for r in 0..64 {
            for c in 0..64 {
                let a = h.data[r * 64 + c];
                let b = h.data[r * 64 + 63 - c];
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn export_is_deterministic() {
        let fv = compute_features(&[fix(1.0, 2.0, 3.0, 150.0)], &[], 7000.0, &FeatureConfig::default(), &DisplayConfig::default());
        let write = || {
            let mut buf = Vec::new();
            export_features_csv(&mut buf, [FeatureRow { image_id: "i", subject_id: "s", features: &fv, levels: Some([0, 1, 2]) }]).unwrap();
            buf
        };
        let a = write();
        assert_eq!(a, write());
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().starts_with("image_id,subject_id,fixation_dispersion,"));
        let mut empty = Vec::new();
        export_features_csv(&mut empty, std::iter::empty::<FeatureRow>()).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }
}
