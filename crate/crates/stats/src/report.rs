//! Per-dimension statistical analysis of eye-movement features across
//! perception levels, plus inter-rater agreement.

use std::collections::BTreeMap;
use std::io::Write;

use gazeperc_core::{Dimension, FeatureVector, PerceptionLevel, AoiShares, CATEGORY_NAMES};
use serde::{Deserialize, Serialize};

use crate::agreement::{bootstrap_ci, krippendorff_alpha, mean_pairwise_distance, AlphaMetric, RatingMatrix};
use crate::anova::one_way_anova;
use crate::error::{Result, StatsError};
use crate::tukey::tukey_hsd;

/// One analysed trial: features, AOI shares and the rater's level per dimension.
#[derive(Debug, Clone)]
pub struct AnalysisTrial {
    pub image_id: String,
    pub subject_id: String,
    pub features: FeatureVector,
    pub aoi: Option<AoiShares>,
    pub levels: [PerceptionLevel; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTest {
    pub dimension: String,
    pub feature: String,
    pub f: f64,
    pub p: f64,
    pub neg_log10_p: f64,
    pub mean_low: f64,
    pub mean_neutral: f64,
    pub mean_high: f64,
    /// Tukey-adjusted p per level pair.
    pub p_high_low: f64,
    pub p_high_neutral: f64,
    pub p_neutral_low: f64,
    /// +1 when High > Low, −1 when High < Low, 0 when equal.
    pub direction: i8,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementSummary {
    pub dimension: String,
    pub alpha_nominal: f64,
    pub alpha_nominal_ci: (f64, f64),
    pub alpha_ordinal: f64,
    pub alpha_ordinal_ci: (f64, f64),
    pub mean_pairwise_distance: f64,
    pub n_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub unit: String,
    pub alpha_level: f64,
    pub tests: Vec<FeatureTest>,
    pub agreement: Vec<AgreementSummary>,
    pub notes: Vec<String>,
}

fn level_groups(trials: &[AnalysisTrial], dim: Dimension, value: impl Fn(&AnalysisTrial) -> Option<f64>) -> [Vec<f64>; 3] {
    let mut g: [Vec<f64>; 3] = Default::default();
    for t in trials {
        if let Some(v) = value(t) {
            g[t.levels[dim.index()].index()].push(v);
        }
    }
    g
}

fn test_one(
    dim: Dimension,
    name: &str,
    groups: &[Vec<f64>; 3],
    alpha_level: f64,
    notes: &mut Vec<String>,
) -> Option<FeatureTest> {
    if groups.iter().any(|g| g.len() < 2) {
        notes.push(format!("{}/{name}: skipped, a level has fewer than two trials", dim.name()));
        return None;
    }
    let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
    let anova = match one_way_anova(&refs) {
        Ok(a) => a,
        Err(e) => {
            notes.push(format!("{}/{name}: skipped, {e}", dim.name()));
            return None;
        }
    };
    if anova.ms_within == 0.0 {
        notes.push(format!("{}/{name}: skipped, zero within-level variance", dim.name()));
        return None;
    }
    let tukey = tukey_hsd(&refs, alpha_level).ok()?;
    let (lo, mid, hi) = (PerceptionLevel::Low.index(), PerceptionLevel::Neutral.index(), PerceptionLevel::High.index());
    let p_adj = |a: usize, b: usize| tukey.pair(a, b).map(|p| p.p_adj);
    let diff = anova.means[2] - anova.means[0];
    Some(FeatureTest {
        dimension: dim.name().to_owned(),
        feature: name.to_owned(),
        f: anova.f,
        p: anova.p,
        neg_log10_p: -anova.p.max(1e-300).log10(),
        mean_low: anova.means[0],
        mean_neutral: anova.means[1],
        mean_high: anova.means[2],
        p_high_low: p_adj(lo, hi)?,
        p_high_neutral: p_adj(mid, hi)?,
        p_neutral_low: p_adj(lo, mid)?,
        direction: if diff > 0.0 { 1 } else if diff < 0.0 { -1 } else { 0 },
        significant: anova.p < alpha_level,
    })
}

/// Runs the ANOVA/Tukey battery for every feature and AOI share, and the
/// agreement statistics from per-image rating lists.
pub fn analysis_report(
    trials: &[AnalysisTrial],
    alpha_level: f64,
    n_boot: usize,
    seed: u64,
) -> Result<AnalysisReport> {
    if trials.is_empty() {
        return Err(StatsError::InsufficientData("no trials to analyse".into()));
    }
    let mut tests = Vec::new();
    let mut notes = Vec::new();
    for dim in Dimension::ALL {
        for (fi, name) in FeatureVector::NAMES.iter().enumerate() {
            let groups = level_groups(trials, dim, |t| (!t.features.degenerate).then(|| t.features.to_array()[fi]));
            tests.extend(test_one(dim, name, &groups, alpha_level, &mut notes));
        }
        for (ci, name) in CATEGORY_NAMES.iter().enumerate() {
            let groups = level_groups(trials, dim, |t| t.aoi.filter(|a| !a.degenerate).map(|a| a.shares[ci]));
            tests.extend(test_one(dim, &format!("aoi_{name}"), &groups, alpha_level, &mut notes));
        }
    }

    let mut agreement = Vec::new();
    for dim in Dimension::ALL {
        let mut per_image: BTreeMap<&str, Vec<u8>> = BTreeMap::new();
        for t in trials {
            per_image.entry(&t.image_id).or_default().push(t.levels[dim.index()].index() as u8);
        }
        let lists: Vec<Vec<u8>> = per_image.into_values().collect();
        let m = RatingMatrix::from_lists(&lists);
        let summary = (|| -> Result<AgreementSummary> {
            let alpha_nominal = krippendorff_alpha(&m, AlphaMetric::Nominal)?;
            let alpha_ordinal = krippendorff_alpha(&m, AlphaMetric::Ordinal)?;
            let alpha_nominal_ci = bootstrap_ci(&m, AlphaMetric::Nominal, n_boot, 0.95, seed)?;
            let alpha_ordinal_ci = bootstrap_ci(&m, AlphaMetric::Ordinal, n_boot, 0.95, seed)?;
            let mpds: Vec<f64> = lists.iter().filter_map(|l| mean_pairwise_distance(l)).collect();
            let mpd = if mpds.is_empty() { f64::NAN } else { mpds.iter().sum::<f64>() / mpds.len() as f64 };
            Ok(AgreementSummary {
                dimension: dim.name().to_owned(),
                alpha_nominal,
                alpha_nominal_ci,
                alpha_ordinal,
                alpha_ordinal_ci,
                mean_pairwise_distance: mpd,
                n_images: lists.len(),
            })
        })();
        match summary {
            Ok(s) => agreement.push(s),
            Err(e) => notes.push(format!("{}: agreement not computed, {e}", dim.name())),
        }
    }

    Ok(AnalysisReport { unit: "trial".into(), alpha_level, tests, agreement, notes })
}

impl AnalysisReport {
    /// Tests with ANOVA p below the alpha level.
    pub fn significant(&self) -> impl Iterator<Item = &FeatureTest> {
        self.tests.iter().filter(|t| t.significant)
    }

    pub fn write_tests_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for t in &self.tests {
            wtr.serialize(t)?;
        }
        wtr.flush()
    }

    /// Manhattan-style plot data: per dimension, feature names and −log10 p.
    pub fn plot_json(&self) -> serde_json::Value {
        let mut by_dim = serde_json::Map::new();
        for dim in Dimension::ALL {
            let rows: Vec<_> = self
                .tests
                .iter()
                .filter(|t| t.dimension == dim.name())
                .map(|t| serde_json::json!({ "feature": t.feature, "neg_log10_p": t.neg_log10_p, "direction": t.direction }))
                .collect();
            by_dim.insert(dim.name().to_owned(), serde_json::Value::Array(rows));
        }
        serde_json::json!({
            "unit": self.unit,
            "threshold": -self.alpha_level.log10(),
            "dimensions": by_dim,
        })
    }
}
