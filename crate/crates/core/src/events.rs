//! Dispersion-threshold (I-DT) fixation and saccade detection.
//!
//! A window starts at the earliest unconsumed sample and spans at least
//! `min_duration_ms`. If its dispersion `(max x - min x) + (max y - min y)`
//! is within the threshold it is grown one sample at a time while the
//! dispersion stays `<=` the threshold, and the grown window becomes a
//! fixation. Otherwise the first sample is dropped. A window never spans two
//! consecutive samples further apart than `max_gap_ms`, so a tracking gap
//! always splits a fixation.

use serde::{Deserialize, Serialize};

use crate::display::DisplayConfig;
use crate::error::{CoreError, Result};
use crate::types::{FixationEvent, GazeSample, SaccadeEvent};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdtParams {
    pub dispersion_threshold_px: f64,
    pub min_duration_ms: f64,
    /// Largest time gap between consecutive samples inside one fixation.
    pub max_gap_ms: f64,
}

impl IdtParams {
    /// 1° dispersion threshold and 100 ms minimum duration.
    pub fn for_display(display: &DisplayConfig) -> Self {
        Self {
            dispersion_threshold_px: display.deg_to_px(1.0),
            min_duration_ms: 100.0,
            max_gap_ms: 40.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.dispersion_threshold_px) || !ok(self.min_duration_ms) || !ok(self.max_gap_ms) {
            return Err(CoreError::Validation(format!("I-DT parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

impl Default for IdtParams {
    fn default() -> Self {
        Self::for_display(&DisplayConfig::default())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventSet {
    pub fixations: Vec<FixationEvent>,
    pub saccades: Vec<SaccadeEvent>,
}

/// Running bounding box of a sample window.
#[derive(Clone, Copy)]
struct Bounds {
    min_x: f64,
    max_x: f64,
    min_y: f64,
    max_y: f64,
}

impl Bounds {
    fn of(s: &GazeSample) -> Self {
        Self { min_x: s.x_px, max_x: s.x_px, min_y: s.y_px, max_y: s.y_px }
    }

    fn with(mut self, s: &GazeSample) -> Self {
        self.min_x = self.min_x.min(s.x_px);
        self.max_x = self.max_x.max(s.x_px);
        self.min_y = self.min_y.min(s.y_px);
        self.max_y = self.max_y.max(s.y_px);
        self
    }

    fn dispersion(&self) -> f64 {
        (self.max_x - self.min_x) + (self.max_y - self.min_y)
    }
}

/// Segments time-sorted valid samples into fixations and saccades.
pub fn detect_fixations(samples: &[GazeSample], params: &IdtParams) -> EventSet {
    let n = samples.len();
    if n < 2 {
        return EventSet::default();
    }
    let thr = params.dispersion_threshold_px;
    let mut windows: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    'outer: while start < n {
        // smallest end covering the minimum duration
        let mut end = start;
        let mut gap = false;
        while samples[end].t_ms - samples[start].t_ms < params.min_duration_ms {
            if end + 1 >= n {
                break 'outer;
            }
            if samples[end + 1].t_ms - samples[end].t_ms > params.max_gap_ms {
                gap = true;
            }
            end += 1;
        }
        if gap {
            start += 1;
            continue;
        }
        let mut bounds = Bounds::of(&samples[start]);
        for s in &samples[start + 1..=end] {
            bounds = bounds.with(s);
        }
        if bounds.dispersion() > thr {
            start += 1;
            continue;
        }
        while end + 1 < n && samples[end + 1].t_ms - samples[end].t_ms <= params.max_gap_ms {
            let grown = bounds.with(&samples[end + 1]);
            if grown.dispersion() > thr {
                break;
            }
            bounds = grown;
            end += 1;
        }
        windows.push((start, end));
        start = end + 1;
    }
    assemble(samples, &windows)
}

fn assemble(samples: &[GazeSample], windows: &[(usize, usize)]) -> EventSet {
    let mut fixations: Vec<FixationEvent> = windows
        .iter()
        .map(|&(a, b)| {
            let members = &samples[a..=b];
            let k = members.len() as f64;
            let cx = members.iter().map(|s| s.x_px).sum::<f64>() / k;
            let cy = members.iter().map(|s| s.y_px).sum::<f64>() / k;
            FixationEvent {
                onset_ms: samples[a].t_ms,
                offset_ms: samples[b].t_ms,
                cx_px: cx,
                cy_px: cy,
                duration_ms: samples[b].t_ms - samples[a].t_ms,
                next_saccade_len_px: 0.0,
            }
        })
        .collect();
    let mut saccades = Vec::new();
    for k in 0..fixations.len().saturating_sub(1) {
        let (cur, next) = (fixations[k], fixations[k + 1]);
        let dist = (next.cx_px - cur.cx_px).hypot(next.cy_px - cur.cy_px);
        fixations[k].next_saccade_len_px = dist;
        let samples_between = windows[k + 1].0 - windows[k].1 - 1;
        if samples_between >= 1 && dist > 0.0 {
            saccades.push(SaccadeEvent {
                onset_ms: cur.offset_ms,
                offset_ms: next.onset_ms,
                amplitude_px: dist,
                duration_ms: next.onset_ms - cur.offset_ms,
            });
        }
    }
    EventSet { fixations, saccades }
}

/// Naive reference implementation of [`detect_fixations`].
///
/// Every candidate window is re-validated from scratch (dispersion and gaps
/// recomputed over all members), which makes it quadratic per fixation. It
/// shares no code with the fast path and exists to cross-check it.
pub fn idt_oracle(samples: &[GazeSample], params: &IdtParams) -> EventSet {
    let n = samples.len();
    let mut out = EventSet::default();
    if n < 2 {
        return out;
    }
    let admissible = |a: usize, b: usize| -> bool {
        let w = &samples[a..=b];
        let spread = |v: Vec<f64>| {
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            hi - lo
        };
        let d = spread(w.iter().map(|s| s.x_px).collect()) + spread(w.iter().map(|s| s.y_px).collect());
        let gap_free = w.windows(2).all(|p| p[1].t_ms - p[0].t_ms <= params.max_gap_ms);
        gap_free && d <= params.dispersion_threshold_px
    };

    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        let Some(mut j) = (i..n).find(|&j| samples[j].t_ms - samples[i].t_ms >= params.min_duration_ms) else {
            break;
        };
        if !admissible(i, j) {
            i += 1;
            continue;
        }
        while j + 1 < n && admissible(i, j + 1) {
            j += 1;
        }
        spans.push((i, j));
        i = j + 1;
    }

    for (k, &(a, b)) in spans.iter().enumerate() {
        let m = (b - a + 1) as f64;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for s in &samples[a..=b] {
            sx += s.x_px;
            sy += s.y_px;
        }
        out.fixations.push(FixationEvent {
            onset_ms: samples[a].t_ms,
            offset_ms: samples[b].t_ms,
            cx_px: sx / m,
            cy_px: sy / m,
            duration_ms: samples[b].t_ms - samples[a].t_ms,
            next_saccade_len_px: 0.0,
        });
        if k > 0 {
            let prev = out.fixations[k - 1];
            let cur = out.fixations[k];
            let len = (cur.cx_px - prev.cx_px).hypot(cur.cy_px - prev.cy_px);
            out.fixations[k - 1].next_saccade_len_px = len;
            let (_, prev_end) = spans[k - 1];
            if a > prev_end + 1 && len > 0.0 {
                out.saccades.push(SaccadeEvent {
                    onset_ms: prev.offset_ms,
                    offset_ms: cur.onset_ms,
                    amplitude_px: len,
                    duration_ms: cur.onset_ms - prev.offset_ms,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SAMPLE_INTERVAL_MS;

    fn at(i: usize, x: f64, y: f64) -> GazeSample {
        GazeSample { t_ms: i as f64 * SAMPLE_INTERVAL_MS, x_px: x, y_px: y, valid: true }
    }

    #[test]
    fn stationary_trace_is_one_fixation() {
        let samples: Vec<_> = (0..600).map(|i| at(i, 800.0, 550.0)).collect();
        let ev = detect_fixations(&samples, &IdtParams::default());
        assert_eq!(ev.fixations.len(), 1);
        assert!(ev.saccades.is_empty());
        assert_eq!(ev.fixations[0].onset_ms, 0.0);
        assert_eq!(ev.fixations[0].offset_ms, samples[599].t_ms);
        assert_eq!(ev.fixations[0].next_saccade_len_px, 0.0);
    }

    #[test]
    fn fewer_than_two_samples_is_empty() {
        let p = IdtParams::default();
        assert_eq!(detect_fixations(&[], &p), EventSet::default());
        assert_eq!(detect_fixations(&[at(0, 1.0, 1.0)], &p), EventSet::default());
        assert_eq!(idt_oracle(&[], &p), EventSet::default());
    }

    #[test]
    fn exact_threshold_counts_as_inside() {
        let p = IdtParams { dispersion_threshold_px: 10.0, min_duration_ms: 5.0, max_gap_ms: 40.0 };
        // dispersion exactly 10 = 6 in x + 4 in y
        let samples = vec![at(0, 0.0, 0.0), at(1, 6.0, 4.0), at(2, 3.0, 2.0), at(3, 3.0, 2.0), at(4, 0.0, 0.0)];
        let ev = detect_fixations(&samples, &p);
        assert_eq!(ev.fixations.len(), 1);
        assert_eq!(ev.fixations[0].offset_ms, samples[4].t_ms);
    }

    #[test]
    fn gap_splits_fixation() {
        let p = IdtParams::default();
        let mut samples: Vec<_> = (0..120).map(|i| at(i, 500.0, 500.0)).collect();
        // 50 ms hole, then the same location again
        let shift = 50.0;
        samples.extend((120..240).map(|i| GazeSample { t_ms: i as f64 * SAMPLE_INTERVAL_MS + shift, ..at(i, 500.0, 500.0) }));
        let ev = detect_fixations(&samples, &p);
        assert_eq!(ev.fixations.len(), 2);
        // identical centroids: no saccade between them
        assert!(ev.saccades.is_empty());
        assert_eq!(ev, idt_oracle(&samples, &p));
    }
}
