//! Tukey HSD with the Tukey–Kramer form for unequal group sizes.
//!
//! Adjusted p-values come from the studentized range distribution
//!
//! ```text
//! P(Q <= q; k, ν) = ∫ f_ν(s) W(q s; k) ds
//! W(w; k)         = k ∫ φ(z) [Φ(z) − Φ(z − w)]^(k−1) dz
//! ```
//!
//! where `f_ν` is the density of `sqrt(χ²_ν / ν)`. Both integrals are
//! evaluated with adaptive Gauss–Kronrod quadrature.

use serde::{Deserialize, Serialize};

use crate::anova::{mean, one_way_anova};
use crate::error::{Result, StatsError};
use crate::integrate::integrate;
use crate::special::{ln_gamma, normal_cdf, normal_pdf};

/// Degrees of freedom above which the chi factor is treated as exactly 1.
const DF_INFINITE: f64 = 1e7;

/// Probability that the range of `k` iid standard normals is at most `w`.
fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let inner = |z: f64| {
        let d = (normal_cdf(z) - normal_cdf(z - w)).max(0.0);
        normal_pdf(z) * d.powi(k as i32 - 1)
    };
    (kf * integrate(inner, -8.5, 8.5 + w, 1e-12)).clamp(0.0, 1.0)
}

/// CDF of the studentized range for `k` groups and `df` error degrees of freedom.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if !q.is_finite() {
        return 1.0;
    }
    if df >= DF_INFINITE {
        return normal_range_cdf(q, k);
    }
    let half = df / 2.0;
    let ln_norm = half * df.ln() - ln_gamma(half) - (half - 1.0) * std::f64::consts::LN_2;
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_norm + (df - 1.0) * s.ln() - df * s * s / 2.0).exp()
        }
    };
    let spread = 12.0 / df.sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let panels = 16;
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        total += integrate(|s| density(s) * normal_range_cdf(q * s, k), a, a + width, 1e-10 / panels as f64);
    }
    total.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    /// Group indices, `i < j`.
    pub i: usize,
    pub j: usize,
    /// mean_j − mean_i
    pub mean_diff: f64,
    pub q: f64,
    pub p_adj: f64,
    pub significant: bool,
    /// Zero pooled within-group variance; q and p are not meaningful.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub pairs: Vec<TukeyPair>,
    pub ms_within: f64,
    pub df_within: f64,
    pub alpha_level: f64,
}

impl TukeyResult {
    pub fn pair(&self, i: usize, j: usize) -> Option<&TukeyPair> {
        self.pairs.iter().find(|p| (p.i, p.j) == (i.min(j), i.max(j)))
    }
}

pub fn tukey_hsd(groups: &[&[f64]], alpha_level: f64) -> Result<TukeyResult> {
    if !(0.0 < alpha_level && alpha_level < 1.0) {
        return Err(StatsError::InvalidArgument(format!("alpha level {alpha_level}")));
    }
    let anova = one_way_anova(groups)?;
    let k = groups.len();
    let ms = anova.ms_within;
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let diff = mean(groups[j]) - mean(groups[i]);
            let se = (ms * (1.0 / groups[i].len() as f64 + 1.0 / groups[j].len() as f64) / 2.0).sqrt();
            let pair = if ms == 0.0 {
                TukeyPair { i, j, mean_diff: diff, q: f64::NAN, p_adj: f64::NAN, significant: false, degenerate: true }
            } else {
                let q = diff.abs() / se;
                let p_adj = (1.0 - ptukey(q, k, anova.df_within)).clamp(0.0, 1.0);
                TukeyPair { i, j, mean_diff: diff, q, p_adj, significant: p_adj < alpha_level, degenerate: false }
            };
            pairs.push(pair);
        }
    }
    Ok(TukeyResult { pairs, ms_within: ms, df_within: anova.df_within, alpha_level })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_group_range_matches_t() {
        // k = 2: Q = sqrt(2)|t|, so P(Q <= q) = P(|t| <= q / sqrt 2) for a t with df
        let q = 2.5;
        let df = 10.0;
        let t = q / 2f64.sqrt();
        let f_tail = crate::special::f_sf(t * t, 1.0, df);
        assert!((ptukey(q, 2, df) - (1.0 - f_tail)).abs() < 1e-8);
    }

    #[test]
    fn reference_values() {
        // scipy.stats.studentized_range.cdf
        let cases = [
            (3.5, 3, 10.0, 0.922_896_689_161_589_6),
            (2.0, 3, 20.0, 0.647_232_248_209_514_4),
            (4.0, 5, 30.0, 0.941_259_346_300_686),
            (3.3, 3, 1000.0, 0.948_242_518_109_318_1),
            (5.0, 4, 3.0, 0.890_109_402_882_926_5),
        ];
        for (q, k, df, want) in cases {
            let got = ptukey(q, k, df);
            assert!((got - want).abs() < 1e-6, "q={q} k={k} df={df}: {got} vs {want}");
        }
    }

    #[test]
    fn identical_groups() {
        let g: &[f64] = &[1.0, 2.0, 3.5];
        let r = tukey_hsd(&[g, g], 0.05).unwrap();
        assert_eq!(r.pairs[0].mean_diff, 0.0);
        assert_eq!(r.pairs[0].p_adj, 1.0);
        assert!(!r.pairs[0].significant);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let r = tukey_hsd(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]], 0.05).unwrap();
        assert!(r.pairs.iter().all(|p| p.degenerate));
    }
}
