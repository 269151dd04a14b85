use gazeperc_core::features::{compute_features, fixation_heatmap, FeatureConfig};
use gazeperc_core::scene::{aoi_time_share, patch_index, PatchGridConfig};
use gazeperc_core::{DisplayConfig, FixationEvent, SaccadeEvent, SemanticLabelMap};
use proptest::prelude::*;

fn fixations_strategy() -> impl Strategy<Value = Vec<FixationEvent>> {
    prop::collection::vec((0.0f64..1600.0, 0.0f64..1100.0, 100.0f64..600.0, 20.0f64..80.0), 1..30).prop_map(|raw| {
        let mut t = 0.0;
        let mut out: Vec<FixationEvent> = Vec::new();
        for (x, y, dur, gap) in raw {
            out.push(FixationEvent { onset_ms: t, offset_ms: t + dur, cx_px: x, cy_px: y, duration_ms: dur, next_saccade_len_px: 0.0 });
            t += dur + gap;
        }
        for k in 0..out.len().saturating_sub(1) {
            out[k].next_saccade_len_px = (out[k + 1].cx_px - out[k].cx_px).hypot(out[k + 1].cy_px - out[k].cy_px);
        }
        out
    })
}

fn saccades_of(f: &[FixationEvent]) -> Vec<SaccadeEvent> {
    f.windows(2)
        .map(|w| SaccadeEvent {
            onset_ms: w[0].offset_ms,
            offset_ms: w[1].onset_ms,
            amplitude_px: (w[1].cx_px - w[0].cx_px).hypot(w[1].cy_px - w[0].cy_px),
            duration_ms: w[1].onset_ms - w[0].offset_ms,
        })
        .collect()
}

proptest! {
    #[test]
    fn translation_invariance(fixes in fixations_strategy(), dx in -300.0f64..300.0, dy in -300.0f64..300.0) {
        // big display so the shifted scanpath stays in the same grid geometry relative to itself
        let d = DisplayConfig::default();
        let grid = FeatureConfig { grid_rows: 1, grid_cols: 1 };
        let span = fixes.last().unwrap().offset_ms + 10.0;
        let a = compute_features(&fixes, &saccades_of(&fixes), span, &grid, &d);
        let moved: Vec<_> = fixes.iter().map(|f| FixationEvent { cx_px: f.cx_px + dx, cy_px: f.cy_px + dy, ..*f }).collect();
        let b = compute_features(&moved, &saccades_of(&moved), span, &grid, &d);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * (1.0 + x.abs());
        prop_assert!(close(a.fixation_dispersion, b.fixation_dispersion));
        prop_assert!(close(a.fixation_scanpath_length, b.fixation_scanpath_length));
        prop_assert!(close(a.saccade_amplitude_mean, b.saccade_amplitude_mean));
        prop_assert!(close(a.saccade_amplitude_var, b.saccade_amplitude_var));
        prop_assert_eq!(a.fixation_entropy, b.fixation_entropy);
        prop_assert_eq!(a.fixation_duration_var, b.fixation_duration_var);
        prop_assert_eq!(a.saccade_duration_mean, b.saccade_duration_mean);
    }

    #[test]
    fn feature_ranges(fixes in fixations_strategy()) {
        let d = DisplayConfig::default();
        let span = fixes.last().unwrap().offset_ms;
        let f = compute_features(&fixes, &saccades_of(&fixes), span, &FeatureConfig::default(), &d);
        prop_assert!(f.fixation_duration_percentage + f.saccade_duration_percentage <= 1.0 + 1e-12);
        prop_assert!(f.fixation_entropy >= 0.0 && f.fixation_entropy <= 100f64.ln() + 1e-12);
        let rel = |s: f64, v: f64| (s * s - v).abs() <= 1e-9 * v.max(1e-300);
        prop_assert!(rel(f.fixation_duration_std, f.fixation_duration_var));
        prop_assert!(rel(f.saccade_amplitude_std, f.saccade_amplitude_var));
        prop_assert_eq!(f.fixation_count.fract(), 0.0);
    }

    #[test]
    fn heatmap_sums_to_one(fixes in fixations_strategy(), sigma in 10.0f64..200.0) {
        let h = fixation_heatmap(&fixes, &DisplayConfig::default(), sigma, 64, 64);
        prop_assert!((h.data.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(h.data.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn aoi_shares_form_distribution(fixes in fixations_strategy(), labels in prop::collection::vec(0u8..19, 12)) {
        let map = SemanticLabelMap::new("m", 4, 3, labels).unwrap();
        let s = aoi_time_share(&fixes, &map, &DisplayConfig::default());
        prop_assert!(!s.degenerate);
        prop_assert!(s.shares.iter().all(|&v| v >= 0.0));
        prop_assert!((s.shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn patch_index_monotone(x1 in 0.0f64..1600.0, x2 in 0.0f64..1600.0, y1 in 0.0f64..1100.0, y2 in 0.0f64..1100.0) {
        let d = DisplayConfig::default();
        let g = PatchGridConfig::default();
        let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
        prop_assert!(patch_index(lo, y1, &d, &g).unwrap() <= patch_index(hi, y1, &d, &g).unwrap());
        let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
        let (a, b) = (patch_index(x1, lo, &d, &g).unwrap(), patch_index(x1, hi, &d, &g).unwrap());
        prop_assert!(a / g.grid_cols <= b / g.grid_cols);
    }
}
