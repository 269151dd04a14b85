//! Inter-rater agreement on discretized ratings.
//!
//! Krippendorff's α uses the coincidence-matrix formulation: every ordered
//! pair of ratings within a unit contributes `1 / (m_u - 1)` to the
//! coincidence of its two values, units with fewer than two ratings are not
//! pairable, and α = 1 − D_o / D_e.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

/// Images × raters grid of optional category indices.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    pub units: Vec<Vec<Option<u8>>>,
}

impl RatingMatrix {
    pub fn new(units: Vec<Vec<Option<u8>>>) -> Self {
        Self { units }
    }

    /// Builds a matrix from per-unit rating lists (rater identity ignored).
    pub fn from_lists(lists: &[Vec<u8>]) -> Self {
        Self { units: lists.iter().map(|l| l.iter().map(|&v| Some(v)).collect()).collect() }
    }

    fn values(&self, unit: usize) -> impl Iterator<Item = u8> + '_ {
        self.units[unit].iter().flatten().copied()
    }

    fn n_categories(&self) -> usize {
        self.units.iter().flatten().flatten().map(|&v| v as usize + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    Nominal,
    Ordinal,
}

fn coincidences(m: &RatingMatrix, units: impl Iterator<Item = usize>, k: usize) -> Vec<f64> {
    let mut o = vec![0.0; k * k];
    let mut counts = vec![0usize; k];
    for u in units {
        counts.iter_mut().for_each(|c| *c = 0);
        let mut mu = 0usize;
        for v in m.values(u) {
            counts[v as usize] += 1;
            mu += 1;
        }
        if mu < 2 {
            continue;
        }
        let w = 1.0 / (mu - 1) as f64;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            for d in 0..k {
                let pairs = if c == d { counts[c] * (counts[c] - 1) } else { counts[c] * counts[d] };
                o[c * k + d] += pairs as f64 * w;
            }
        }
    }
    o
}

fn alpha_from_coincidences(o: &[f64], k: usize, metric: AlphaMetric) -> Result<f64> {
    let marg: Vec<f64> = (0..k).map(|c| (0..k).map(|d| o[c * k + d]).sum()).collect();
    let n: f64 = marg.iter().sum();
    if n < 2.0 {
        return Err(StatsError::InsufficientData("no unit has two ratings".into()));
    }
    let delta = |c: usize, d: usize| -> f64 {
        if c == d {
            return 0.0;
        }
        match metric {
            AlphaMetric::Nominal => 1.0,
            AlphaMetric::Ordinal => {
                let (lo, hi) = (c.min(d), c.max(d));
                let s: f64 = marg[lo..=hi].iter().sum::<f64>() - (marg[c] + marg[d]) / 2.0;
                s * s
            }
        }
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dl = delta(c, d);
            observed += o[c * k + d] * dl;
            expected += marg[c] * marg[d] * dl;
        }
    }
    if expected <= 0.0 {
        return Err(StatsError::Degenerate("zero expected disagreement".into()));
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

pub fn krippendorff_alpha(m: &RatingMatrix, metric: AlphaMetric) -> Result<f64> {
    let k = m.n_categories();
    alpha_from_coincidences(&coincidences(m, 0..m.units.len(), k), k, metric)
}

/// Percentile bootstrap interval over units resampled with replacement.
///
/// Replicate `b` draws from its own ChaCha stream so the result does not
/// depend on evaluation order. Replicates with zero expected disagreement are
/// skipped.
pub fn bootstrap_ci(m: &RatingMatrix, metric: AlphaMetric, n_boot: usize, level: f64, seed: u64) -> Result<(f64, f64)> {
    if !(0.0 < level && level < 1.0) || n_boot == 0 {
        return Err(StatsError::InvalidArgument(format!("level {level}, n_boot {n_boot}")));
    }
    krippendorff_alpha(m, metric)?;
    let k = m.n_categories();
    let n_units = m.units.len();
    let mut reps = Vec::with_capacity(n_boot);
    let mut idx = vec![0usize; n_units];
    for b in 0..n_boot {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        idx.iter_mut().for_each(|i| *i = rng.gen_range(0..n_units));
        match alpha_from_coincidences(&coincidences(m, idx.iter().copied(), k), k, metric) {
            Ok(a) => reps.push(a),
            Err(StatsError::Degenerate(_)) | Err(StatsError::InsufficientData(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if reps.is_empty() {
        return Err(StatsError::Degenerate("every bootstrap replicate was degenerate".into()));
    }
    reps.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&reps, tail), quantile_sorted(&reps, 1.0 - tail)))
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean |a − b| over unordered rater pairs of one image; `None` with fewer than two ratings.
pub fn mean_pairwise_distance(levels: &[u8]) -> Option<f64> {
    let n = levels.len();
    if n < 2 {
        return None;
    }
    let mut total = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            total += levels[i].abs_diff(levels[j]) as u64;
        }
    }
    Some(total as f64 / (n * (n - 1) / 2) as f64)
}
