use gazeperc_core::{Dimension, FeatureVector, PerceptionLevel};
use gazeperc_stats::{
    analysis_report, bootstrap_ci, krippendorff_alpha, one_way_anova, tukey_hsd, AlphaMetric, AnalysisTrial,
    RatingMatrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<Option<u8>>>> {
    // three raters, a few missing cells; correlated so α is usually positive
    prop::collection::vec((0u8..3, prop::collection::vec((any::<bool>(), 0u8..10), 3)), 4..25).prop_map(|rows| {
        rows.into_iter()
            .map(|(base, cells)| {
                cells
                    .into_iter()
                    .map(|(keep, noise)| keep.then(|| if noise < 7 { base } else { noise % 3 }))
                    .collect()
            })
            .collect()
    })
}

fn computable(m: &RatingMatrix) -> bool {
    krippendorff_alpha(m, AlphaMetric::Nominal).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn alpha_invariant_to_row_and_column_permutation(units in matrix_strategy(), seed in any::<u64>()) {
        let m = RatingMatrix::new(units.clone());
        prop_assume!(computable(&m));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = units.clone();
        for i in (1..rows.len()).rev() {
            rows.swap(i, rng.gen_range(0..=i));
        }
        let perm = [2usize, 0, 1];
        let cols: Vec<Vec<Option<u8>>> = rows.iter().map(|r| perm.iter().map(|&c| r[c]).collect()).collect();
        for metric in [AlphaMetric::Nominal, AlphaMetric::Ordinal] {
            let a = krippendorff_alpha(&m, metric).unwrap();
            let b = krippendorff_alpha(&RatingMatrix::new(cols.clone()), metric).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_ci_contains_estimate(units in matrix_strategy(), seed in any::<u64>()) {
        let m = RatingMatrix::new(units);
        prop_assume!(computable(&m));
        let a = krippendorff_alpha(&m, AlphaMetric::Nominal).unwrap();
        let (lo, hi) = bootstrap_ci(&m, AlphaMetric::Nominal, 200, 0.95, seed).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!(lo <= a + 1e-12 && a <= hi + 1e-12, "{lo} {a} {hi}");
    }

    #[test]
    fn anova_and_tukey_p_in_unit_interval(
        groups in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2..12), 2..5),
        shift in -1e4f64..1e4,
    ) {
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        let r = one_way_anova(&refs).unwrap();
        prop_assert!(r.f >= 0.0 && (0.0..=1.0).contains(&r.p));
        let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v + shift).collect()).collect();
        let s = one_way_anova(&shifted.iter().map(|g| g.as_slice()).collect::<Vec<_>>()).unwrap();
        prop_assert!((r.f - s.f).abs() <= 1e-10 * r.f.max(1.0) + 1e-6 * r.f);
        let t = tukey_hsd(&refs, 0.05).unwrap();
        for p in &t.pairs {
            prop_assert!((0.0..=1.0).contains(&p.p_adj));
            prop_assert_eq!(p.significant, p.p_adj < 0.05);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    /// Adjusted p never falls below the unadjusted pooled-variance pair p.
    #[test]
    fn tukey_adjusted_not_below_unadjusted(
        groups in prop::collection::vec(prop::collection::vec(-10f64..10.0, 3..8), 3..5),
    ) {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let refs: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        let t = tukey_hsd(&refs, 0.05).unwrap();
        let st = StudentsT::new(0.0, 1.0, t.df_within).unwrap();
        for p in &t.pairs {
            let (ni, nj) = (refs[p.i].len() as f64, refs[p.j].len() as f64);
            let tstat = p.mean_diff.abs() / (t.ms_within * (1.0 / ni + 1.0 / nj)).sqrt();
            let unadj = 2.0 * (1.0 - st.cdf(tstat));
            prop_assert!(p.p_adj >= unadj - 1e-7, "{} < {}", p.p_adj, unadj);
        }
    }
}

fn trial(i: usize, fixation_count: f64, dispersion: f64, level: PerceptionLevel) -> AnalysisTrial {
    AnalysisTrial {
        image_id: format!("img{}", i / 5),
        subject_id: format!("s{}", i % 5),
        features: FeatureVector { fixation_count, fixation_dispersion: dispersion, ..Default::default() },
        aoi: None,
        levels: [level; 3],
    }
}

#[test]
fn report_detects_constructed_effect_and_skips_null() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng) };
    let mut trials = Vec::new();
    for i in 0..300 {
        let level = PerceptionLevel::ALL[i % 3];
        let shift = if level == PerceptionLevel::High { 3.0 } else { 0.0 };
        trials.push(trial(i, 10.0 + shift + normal(&mut rng), 50.0 + normal(&mut rng), level));
    }
    let r = analysis_report(&trials, 0.05, 50, 1).unwrap();
    let n_tested = 3 * (FeatureVector::LEN + gazeperc_core::N_CATEGORIES);
    assert!(r.tests.len() <= n_tested);
    for dim in Dimension::ALL {
        let fc = r.tests.iter().find(|t| t.dimension == dim.name() && t.feature == "fixation_count").unwrap();
        assert!(fc.significant);
        assert_eq!(fc.direction, 1);
        assert!(fc.p_high_low < 0.05);
        assert!(fc.p_neutral_low > 0.05);
    }
    // constant features are skipped with a note
    assert!(!r.tests.iter().any(|t| t.feature == "saccade_count"));
    assert!(r.notes.iter().any(|n| n.contains("saccade_count")));
    assert_eq!(r.unit, "trial");
    let plot = r.plot_json();
    assert!(plot["dimensions"]["wealthy"].as_array().unwrap().len() >= 2);
    let mut csv = Vec::new();
    r.write_tests_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), r.tests.len() + 1);
}

#[test]
fn report_null_feature_absent_from_significant_table() {
    // Same distribution at every level, spread evenly so the means coincide
    let mut trials = Vec::new();
    for i in 0..90 {
        let level = PerceptionLevel::ALL[i % 3];
        let v = ((i / 3) % 10) as f64;
        trials.push(trial(i, v, 20.0 + (i % 7) as f64, level));
    }
    let r = analysis_report(&trials, 0.05, 20, 1).unwrap();
    assert!(!r.significant().any(|t| t.feature == "fixation_count"));
}
