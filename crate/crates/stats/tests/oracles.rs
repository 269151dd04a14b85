//! Cross-checks against independent formulations: statrs distributions,
//! direct sums of squares and Monte-Carlo simulation of the studentized range.

use gazeperc_stats::{krippendorff_alpha, mean_pairwise_distance, one_way_anova, tukey_hsd, AlphaMetric, RatingMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

fn direct_f(groups: &[&[f64]]) -> (f64, f64, f64) {
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let k = groups.len();
    let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let grand = all.iter().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let (d1, d2) = ((k - 1) as f64, (n - k) as f64);
    ((ssb / d1) / (ssw / d2), d1, d2)
}

#[test]
fn anova_matches_direct_formula_and_statrs() {
    let cases: Vec<Vec<Vec<f64>>> = vec![
        vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]],
        vec![vec![6.1, 5.9, 7.2, 6.6], vec![8.0, 7.4, 7.9], vec![5.0, 5.5, 6.1, 4.8, 5.2]],
        vec![vec![0.3, -1.2, 0.8, 2.2, 1.0, -0.4], vec![1.9, 2.4, 0.7, 3.1]],
    ];
    for c in &cases {
        let refs: Vec<&[f64]> = c.iter().map(|g| g.as_slice()).collect();
        let r = one_way_anova(&refs).unwrap();
        let (f, d1, d2) = direct_f(&refs);
        assert!((r.f - f).abs() < 1e-9 * f.max(1.0));
        let p = 1.0 - FisherSnedecor::new(d1, d2).unwrap().cdf(f);
        assert!((r.p - p).abs() < 1e-10, "{} vs {}", r.p, p);
    }
    let r = one_way_anova(&[&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0], &[3.0, 4.0, 5.0]]).unwrap();
    // SSB = 6, SSW = 6, df = (2, 6): F = 3, p = (1 + 2·3/6)^-3
    assert!((r.f - 3.0).abs() < 1e-12);
    assert!((r.p - 0.125).abs() < 1e-12);
}

#[test]
fn two_groups_f_is_t_squared() {
    let a = [2.3, 4.1, 3.3, 5.0, 2.8, 3.9];
    let b = [4.4, 5.2, 6.1, 3.9, 5.8];
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let ss = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() + b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
    let sp2 = ss / (na + nb - 2.0);
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let r = one_way_anova(&[&a, &b]).unwrap();
    assert!((r.f - t * t).abs() < 1e-9);
    let p_t = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, na + nb - 2.0).unwrap().cdf(t.abs()));
    assert!((r.p - p_t).abs() < 1e-10);
}

/// P(Q >= q) for the studentized range by simulation, with its standard error.
fn mc_tukey_sf(qs: &[f64], k: usize, df: f64, draws: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = ChiSquared::new(df).unwrap();
    let mut hits = vec![0u64; qs.len()];
    for _ in 0..draws {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for _ in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            lo = lo.min(z);
            hi = hi.max(z);
        }
        let s = (chi.sample(&mut rng) / df).sqrt();
        let q = (hi - lo) / s;
        for (h, &t) in hits.iter_mut().zip(qs) {
            if q >= t {
                *h += 1;
            }
        }
    }
    hits.iter()
        .map(|&h| {
            let p = h as f64 / draws as f64;
            (p, (p * (1.0 - p) / draws as f64).sqrt())
        })
        .collect()
}

#[test]
fn tukey_p_matches_monte_carlo() {
    // three treatments, five plots each
    let a = [24.5, 23.5, 26.4, 27.1, 29.9];
    let b = [28.4, 34.2, 29.5, 32.2, 30.1];
    let c = [26.1, 28.3, 24.3, 26.2, 27.8];
    let r = tukey_hsd(&[&a, &b, &c], 0.05).unwrap();
    let qs: Vec<f64> = r.pairs.iter().map(|p| p.q).collect();
    let mc = mc_tukey_sf(&qs, 3, r.df_within, 10_000_000, 11);
    for (pair, (p_mc, se)) in r.pairs.iter().zip(mc) {
        assert!(
            (pair.p_adj - p_mc).abs() <= 2.0 * se,
            "pair ({}, {}): q={} p={} mc={} se={}",
            pair.i,
            pair.j,
            pair.q,
            pair.p_adj,
            p_mc,
            se
        );
    }
    // A vs B is the only difference large enough to matter at 0.05
    assert!(r.pair(0, 1).unwrap().significant);
    assert!(!r.pair(0, 2).unwrap().significant);
}

#[test]
fn tukey_q_location_invariant() {
    let g = [vec![1.0, 2.5, 2.0], vec![3.0, 4.1, 3.6, 2.9], vec![0.5, 1.1]];
    let shifted: Vec<Vec<f64>> = g.iter().map(|v| v.iter().map(|x| x + 1234.5).collect()).collect();
    let r1 = tukey_hsd(&g.iter().map(|v| v.as_slice()).collect::<Vec<_>>(), 0.05).unwrap();
    let r2 = tukey_hsd(&shifted.iter().map(|v| v.as_slice()).collect::<Vec<_>>(), 0.05).unwrap();
    for (a, b) in r1.pairs.iter().zip(&r2.pairs) {
        assert!((a.q - b.q).abs() < 1e-9);
    }
}

#[test]
fn alpha_hand_case_and_mpd() {
    let m = RatingMatrix::new(vec![
        vec![Some(0), Some(0), Some(1)],
        vec![Some(1), Some(1), None],
        vec![Some(2), Some(2), Some(2)],
        vec![Some(0), None, Some(2)],
    ]);
    assert!((krippendorff_alpha(&m, AlphaMetric::Nominal).unwrap() - 5.0 / 11.0).abs() < 1e-12);
    assert!((krippendorff_alpha(&m, AlphaMetric::Ordinal).unwrap() - 73.0 / 196.0).abs() < 1e-12);
    assert_eq!(mean_pairwise_distance(&[0, 1, 2]), Some(4.0 / 3.0));
    assert_eq!(mean_pairwise_distance(&[0, 2]), Some(2.0));
    assert_eq!(mean_pairwise_distance(&[1; 5]), Some(0.0));
    assert_eq!(mean_pairwise_distance(&[1]), None);
}

#[test]
fn alpha_near_zero_for_independent_raters() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lists: Vec<Vec<u8>> = (0..10_000).map(|_| (0..5).map(|_| rng.gen_range(0..3u8)).collect()).collect();
    let a = krippendorff_alpha(&RatingMatrix::from_lists(&lists), AlphaMetric::Nominal).unwrap();
    assert!(a.abs() < 0.05, "{a}");
}
