//! Statistics used by the gaze analyses: Krippendorff's α with bootstrap
//! intervals, mean pairwise rater distance, one-way ANOVA and Tukey HSD.

pub mod agreement;
pub mod anova;
pub mod error;
pub mod integrate;
pub mod report;
pub mod special;
pub mod tukey;

pub use agreement::{bootstrap_ci, krippendorff_alpha, mean_pairwise_distance, AlphaMetric, RatingMatrix};
pub use anova::{one_way_anova, AnovaResult};
pub use error::{Result, StatsError};
pub use report::{analysis_report, AnalysisReport, AnalysisTrial};
pub use tukey::{ptukey, tukey_hsd, TukeyPair, TukeyResult};
