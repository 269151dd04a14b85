//! Stratified image selection over perception-score bins.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Per-image scores, one slot per dimension; `None` marks a missing score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub image_id: String,
    pub scores: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct QuotaSample {
    pub image_ids: BTreeSet<String>,
    /// Bins that held fewer than `per_bin` images.
    pub warnings: Vec<String>,
    pub n_complete_rows: usize,
}

/// For each of the first `dims` dimensions: `bins` equal-width bins over
/// [min, max], `per_bin` ids drawn without replacement from each; the
/// result is the union. Rows missing any score, in any column, are dropped first.
pub fn quota_sample(rows: &[ScoreRow], dims: usize, bins: usize, per_bin: usize, seed: u64) -> Result<QuotaSample> {
    if bins == 0 {
        return invalid("bins must be positive");
    }
    let mut complete: Vec<(&str, Vec<f64>)> = Vec::new();
    for r in rows {
        if r.scores.len() < dims {
            return invalid(format!("image '{}' has {} score columns, expected {dims}", r.image_id, r.scores.len()));
        }
        // a row missing any score is dropped, even one outside the first `dims`
        if let Some(s) = r.scores.iter().copied().collect::<Option<Vec<f64>>>() {
            if s.iter().any(|v| !v.is_finite()) {
                return invalid(format!("image '{}' has a non-finite score", r.image_id));
            }
            complete.push((&r.image_id, s));
        }
    }
    complete.sort_by(|a, b| a.0.cmp(b.0));
    let mut out = QuotaSample { n_complete_rows: complete.len(), ..Default::default() };
    if per_bin == 0 || complete.is_empty() {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for d in 0..dims {
        let (lo, hi) = complete.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.1[d]), hi.max(r.1[d])));
        let width = (hi - lo) / bins as f64;
        let mut members: Vec<Vec<&str>> = vec![Vec::new(); bins];
        for (id, s) in &complete {
            let b = if width > 0.0 { (((s[d] - lo) / width).floor() as usize).min(bins - 1) } else { 0 };
            members[b].push(id);
        }
        for (b, m) in members.iter().enumerate() {
            if m.len() < per_bin {
                if !m.is_empty() || width > 0.0 {
                    out.warnings.push(format!("dimension {d}, bin {b}: {} images, wanted {per_bin}", m.len()));
                }
                out.image_ids.extend(m.iter().map(|s| s.to_string()));
            } else {
                out.image_ids.extend(sample(&mut rng, m.len(), per_bin).into_iter().map(|i| m[i].to_string()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(n: usize) -> Vec<ScoreRow> {
        (0..n)
            .map(|i| ScoreRow {
                image_id: format!("i{i:04}"),
                scores: vec![Some(i as f64), Some(((i * 7) % n) as f64), if i % 50 == 0 { None } else { Some(1.0) }],
            })
            .collect()
    }

    #[test]
    fn zero_per_bin_is_empty() {
        assert!(quota_sample(&rows(100), 3, 10, 0, 1).unwrap().image_ids.is_empty());
    }

    #[test]
    fn same_seed_same_set_and_missing_rows_dropped() {
        let r = rows(1000);
        let a = quota_sample(&r, 2, 10, 5, 9).unwrap();
        let b = quota_sample(&r, 2, 10, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_complete_rows, 1000 - 20);
        assert!(a.image_ids.len() <= 100 && a.image_ids.len() >= 50);
        let all = quota_sample(&r, 3, 10, 5, 9).unwrap();
        assert!(all.image_ids.iter().all(|id| id[1..].parse::<usize>().unwrap() % 50 != 0));
    }

    #[test]
    fn short_bins_take_everything_and_warn() {
        let r = rows(30);
        let s = quota_sample(&r, 1, 10, 80, 0).unwrap();
        assert_eq!(s.image_ids.len(), 29);
        assert_eq!(s.warnings.len(), 10);
    }
}
