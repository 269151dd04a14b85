//! Scanpath simulation: a fixation plan (where and how long) followed by
//! 600 Hz sample rendering with jitter, saccade sweeps and dropouts.

use gazeperc_core::{DisplayConfig, GazeSample, N_CATEGORIES, SAMPLE_INTERVAL_MS, TRIAL_SPAN_MS};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::GazeCoupling;
use crate::scene::{SynthImage, VALENCE};

const BASE_DURATION_MS: f64 = 230.0;
const DURATION_LOG_SD: f64 = 0.3;
const MIN_DURATION_MS: f64 = 120.0;
const MAX_DURATION_MS: f64 = 1200.0;
const BASE_AMPLITUDE_PX: f64 = 280.0;
const AMPLITUDE_LOG_SD: f64 = 0.5;
/// Candidate targets drawn per saccade; the one closest to the intended amplitude wins.
const TARGET_CANDIDATES: usize = 8;
const JITTER_PX: f64 = 2.0;
const MAX_JITTER_PX: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedFixation {
    pub x_px: f64,
    pub y_px: f64,
    pub category: u8,
    pub onset_ms: f64,
    pub duration_ms: f64,
    /// Duration of the saccade that follows.
    pub saccade_ms: f64,
}

/// Per-trial nuisance offsets unrelated to the rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TrialStyle {
    pub delta: f64,
    pub duration_offset: f64,
    pub amplitude_offset: f64,
}

fn pixel_to_display(
    image: &SynthImage,
    pixel: u32,
    display: &DisplayConfig,
    rng: &mut ChaCha8Rng,
) -> (f64, f64) {
    let w = image.map.width;
    let (col, row) = ((pixel as usize % w) as f64, (pixel as usize / w) as f64);
    let sx = display.width_px / w as f64;
    let sy = display.height_px / image.map.height as f64;
    // keep clear of the pixel border so the centroid maps back to this pixel
    let u = rng.gen_range(0.25..0.75);
    let v = rng.gen_range(0.25..0.75);
    ((col + u) * sx, (row + v) * sy)
}

fn category_at(image: &SynthImage, x: f64, y: f64, display: &DisplayConfig) -> u8 {
    gazeperc_core::aoi_at(&image.map, x, y, display)
}

pub(crate) fn plan_fixations(
    image: &SynthImage,
    style: &TrialStyle,
    coupling: &GazeCoupling,
    display: &DisplayConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<PlannedFixation> {
    let delta = style.delta;
    let comp = image.composition();
    let tilt: Vec<f64> = (0..N_CATEGORIES)
        .map(|c| comp[c] * (coupling.dwell_tilt * delta * VALENCE[c]).exp())
        .collect();
    let tilt_total: f64 = tilt.iter().sum();
    let duration = |cat: u8, onset: f64, rng: &mut ChaCha8Rng| {
        let v = VALENCE[cat as usize];
        let phase = 2.0 * onset / TRIAL_SPAN_MS - 1.0;
        let ln = BASE_DURATION_MS.ln()
            + coupling.duration_gain * delta
            + coupling.duration_aoi_gain * delta * v
            - coupling.duration_trend_gain * delta * phase
            + style.duration_offset
            + DURATION_LOG_SD * rng.sample::<f64, _>(StandardNormal);
        ln.exp().clamp(MIN_DURATION_MS, MAX_DURATION_MS)
    };
    let amp_noise = Normal::new(0.0, AMPLITUDE_LOG_SD).expect("constant sd");

    let (mut x, mut y) = (display.width_px / 2.0, display.height_px / 2.0);
    let mut cat = category_at(image, x, y, display);
    let mut t = 0.0;
    let mut plan = Vec::new();
    while t < TRIAL_SPAN_MS {
        let d = duration(cat, t, rng);
        // next target
        let mut pick = rng.gen::<f64>() * tilt_total;
        let mut next_cat = N_CATEGORIES - 1;
        for (c, w) in tilt.iter().enumerate() {
            if pick < *w {
                next_cat = c;
                break;
            }
            pick -= w;
        }
        while image.class_pixels[next_cat].is_empty() {
            next_cat = (next_cat + 1) % N_CATEGORIES;
        }
        let want = BASE_AMPLITUDE_PX
            * (coupling.saccade_gain * delta + style.amplitude_offset + amp_noise.sample(rng))
                .exp();
        let pixels = &image.class_pixels[next_cat];
        let mut best = (f64::INFINITY, x, y);
        for _ in 0..TARGET_CANDIDATES {
            let p = pixels[rng.gen_range(0..pixels.len())];
            let (cx, cy) = pixel_to_display(image, p, display, rng);
            let miss = ((cx - x).hypot(cy - y) - want).abs();
            if miss < best.0 {
                best = (miss, cx, cy);
            }
        }
        let amp_deg = display.px_to_deg((best.1 - x).hypot(best.2 - y));
        let sacc = 21.0 + 2.2 * amp_deg;
        plan.push(PlannedFixation {
            x_px: x,
            y_px: y,
            category: cat,
            onset_ms: t,
            duration_ms: d,
            saccade_ms: sacc,
        });
        t += d + sacc;
        (x, y) = (best.1, best.2);
        cat = next_cat as u8;
    }
    plan
}

/// Renders a plan to samples over the fixed trial span.
pub(crate) fn render_samples(
    plan: &[PlannedFixation],
    display: &DisplayConfig,
    dropouts_per_trial: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<GazeSample> {
    let n = (TRIAL_SPAN_MS / SAMPLE_INTERVAL_MS).round() as usize;
    let jitter = Normal::new(0.0, JITTER_PX).expect("constant sd");
    let mut j = || jitter.sample(rng).clamp(-MAX_JITTER_PX, MAX_JITTER_PX);
    let max_x = display.width_px - 1e-6;
    let max_y = display.height_px - 1e-6;
    let mut samples = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 * SAMPLE_INTERVAL_MS;
        while k + 1 < plan.len() && t >= plan[k + 1].onset_ms {
            k += 1;
        }
        let f = &plan[k];
        let fix_end = f.onset_ms + f.duration_ms;
        let (x, y) = if t < fix_end || k + 1 == plan.len() {
            (f.x_px + j(), f.y_px + j())
        } else {
            let next = &plan[k + 1];
            let a = ((t - fix_end) / f.saccade_ms).clamp(0.0, 1.0);
            (
                f.x_px + a * (next.x_px - f.x_px),
                f.y_px + a * (next.y_px - f.y_px),
            )
        };
        samples.push(GazeSample {
            t_ms: t,
            x_px: x.clamp(0.0, max_x),
            y_px: y.clamp(0.0, max_y),
            valid: true,
        });
    }
    if dropouts_per_trial > 0.0 {
        let count = Poisson::new(dropouts_per_trial)
            .expect("positive rate")
            .sample(rng) as usize;
        for _ in 0..count {
            let start = rng.gen_range(0..n);
            let len = rng.gen_range(3..=12);
            for s in samples.iter_mut().skip(start).take(len) {
                *s = GazeSample {
                    t_ms: s.t_ms,
                    x_px: -1.0,
                    y_px: -1.0,
                    valid: false,
                };
            }
        }
    }
    samples
}

/// Mean log duration of a plan's fixations.
pub(crate) fn gaze_summary(plan: &[PlannedFixation]) -> f64 {
    plan.iter().map(|f| f.duration_ms.ln()).sum::<f64>() / plan.len() as f64
}
