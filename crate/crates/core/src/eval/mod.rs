//! Scoring localization output against ground truth.

mod ranking;
mod scoring;
mod truth;

pub use ranking::{percentile_rank, rank_queries, RankingDistribution, Variant};
pub use scoring::{
    candidate_thresholds, score_matches, sweep_threshold, EvalReport, ThresholdSweep,
};
pub use truth::GroundTruth;

/// Default error, in reference frames, above which a match is a false positive.
pub const DEFAULT_FP_TOLERANCE: f64 = 10.0;
