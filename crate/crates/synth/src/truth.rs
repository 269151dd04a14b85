//! Ground-truth records and the summary checks run against them.

use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;

/// Latent decomposition of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub image_id: String,
    pub subject_id: String,
    pub mu: [f64; 3],
    /// Shared deviation driving the gaze.
    pub delta: f64,
    /// Per-dimension deviation `Δ_k = sign_k · δ`.
    pub gaze_delta: [f64; 3],
    pub subject_bias: [f64; 3],
    pub eps: [f64; 3],
    pub z: [f64; 3],
    pub ratings: [u8; 3],
    /// Mean log fixation duration of the planned scanpath.
    pub gaze_summary: f64,
}

/// 5-point score of `z`: one plus the number of cut points it exceeds.
pub fn quantize(z: f64, thresholds: &[f64; 4]) -> u8 {
    1 + thresholds.iter().filter(|&&t| z > t).count() as u8
}

pub fn write_ground_truth(path: &Path, truths: &[TrialTruth]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for t in truths {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Kolmogorov-Smirnov distance between a sample and the standard normal.
pub fn ks_normal(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = std.cdf(x);
            (f - i as f64 / n as f64)
                .abs()
                .max((f - (i + 1) as f64 / n as f64).abs())
        })
        .fold(0.0, f64::max)
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Splits values into three equal-count bins (0, 1, 2) by rank.
pub fn tertiles(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut bins = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        bins[i] = (3 * rank / n.max(1)).min(2);
    }
    bins
}

/// Plug-in mutual information (nats) between two 3-level codes.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    let mut joint = [[0.0f64; 3]; 3];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
    }
    let pa: Vec<f64> = joint
        .iter()
        .map(|r| r.iter().sum::<f64>() / n as f64)
        .collect();
    let pb: Vec<f64> = (0..3)
        .map(|j| joint.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut mi = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let p = joint[i][j] / n as f64;
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSummary {
    pub n_trials: usize,
    pub n_images: usize,
    /// KS distance of the per-image `μ` from N(0, 1), per dimension.
    pub mu_ks: [f64; 3],
    /// Correlation of `Δ` with `μ` across trials, per dimension.
    pub delta_mu_r: [f64; 3],
    /// Trials per discretised level (low, neutral, high), per dimension.
    pub level_counts: [[usize; 3]; 3],
    /// Mutual information between the tertiled gaze summary and each dimension's level.
    pub gaze_label_mi: [f64; 3],
    /// Whether re-quantising the stored `z` reproduces every stored rating.
    pub ratings_reconstruct: bool,
}

pub fn describe_ground_truth(truths: &[TrialTruth], thresholds: &[f64; 4]) -> GroundTruthSummary {
    let mut seen = std::collections::HashSet::new();
    let image_mu: Vec<[f64; 3]> = truths
        .iter()
        .filter(|t| seen.insert(t.image_id.as_str()))
        .map(|t| t.mu)
        .collect();
    let gaze_bins = tertiles(&truths.iter().map(|t| t.gaze_summary).collect::<Vec<_>>());
    let level = |r: u8| match r {
        1 | 2 => 0,
        3 => 1,
        _ => 2,
    };
    let dim = |k: usize| {
        let mu: Vec<f64> = truths.iter().map(|t| t.mu[k]).collect();
        let delta: Vec<f64> = truths.iter().map(|t| t.gaze_delta[k]).collect();
        let levels: Vec<usize> = truths.iter().map(|t| level(t.ratings[k])).collect();
        let mut counts = [0; 3];
        for &l in &levels {
            counts[l] += 1;
        }
        let ks = ks_normal(&image_mu.iter().map(|m| m[k]).collect::<Vec<_>>());
        (
            ks,
            pearson(&delta, &mu),
            counts,
            mutual_information(&gaze_bins, &levels),
        )
    };
    let per: Vec<_> = (0..3).map(dim).collect();
    GroundTruthSummary {
        n_trials: truths.len(),
        n_images: image_mu.len(),
        mu_ks: std::array::from_fn(|k| per[k].0),
        delta_mu_r: std::array::from_fn(|k| per[k].1),
        level_counts: std::array::from_fn(|k| per[k].2),
        gaze_label_mi: std::array::from_fn(|k| per[k].3),
        ratings_reconstruct: truths
            .iter()
            .all(|t| (0..3).all(|k| quantize(t.z[k], thresholds) == t.ratings[k])),
    }
}
