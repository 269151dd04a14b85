//! One-way ANOVA.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::f_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub ms_within: f64,
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    /// Zero within-group variance with unequal means: F is infinite and p is 0.
    pub degenerate: bool,
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn one_way_anova(groups: &[&[f64]]) -> Result<AnovaResult> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::InsufficientData("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(StatsError::InsufficientData("ANOVA groups must be non-empty".into()));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n <= k {
        return Err(StatsError::InsufficientData(format!("{n} observations for {k} groups")));
    }
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let counts: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let grand = groups.iter().flat_map(|g| g.iter()).sum::<f64>() / n as f64;
    let ss_between: f64 = means.iter().zip(&counts).map(|(m, &c)| c as f64 * (m - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m).powi(2)).sum::<f64>())
        .sum();
    let df_between = (k - 1) as f64;
    let df_within = (n - k) as f64;
    let ms_within = ss_within / df_within;
    let ms_between = ss_between / df_between;

    let all_means_equal = means.iter().all(|&m| m == means[0]);
    let (f, p, degenerate) = if ss_within == 0.0 {
        if all_means_equal {
            (0.0, 1.0, false)
        } else {
            (f64::INFINITY, 0.0, true)
        }
    } else {
        let f = ms_between / ms_within;
        (f, f_sf(f, df_between, df_within), false)
    };
    Ok(AnovaResult { f, p, df_between, df_within, ms_within, means, counts, degenerate })
}
