//! Where does the true match land when single-image scores are ranked?

use rayon::prelude::*;

use super::GroundTruth;
use crate::imaging::Template;
use crate::matching::{difference_vector, normalize_scores, TemplateStore};
use crate::{round_half_up, Error, Execution, Result};

/// Which normalizations feed the single-image comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Downsampled grayscale intensities.
    Raw,
    PatchOnly,
    /// Raw intensities, neighborhood-normalized difference vectors.
    NeighborhoodOnly,
    Both,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Raw,
        Variant::PatchOnly,
        Variant::NeighborhoodOnly,
        Variant::Both,
    ];

    pub fn patch_normalized(self) -> bool {
        matches!(self, Variant::PatchOnly | Variant::Both)
    }

    pub fn neighborhood_normalized(self) -> bool {
        matches!(self, Variant::NeighborhoodOnly | Variant::Both)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::PatchOnly => "patch_only",
            Variant::NeighborhoodOnly => "neighborhood_only",
            Variant::Both => "both",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown variant `{s}`")))
    }
}

/// `(rank - 1) / (candidates - 1)`: 0 for the best, 1 for the worst.
pub fn percentile_rank(rank: usize, candidates: usize) -> f64 {
    if candidates <= 1 {
        0.0
    } else {
        (rank - 1) as f64 / (candidates - 1) as f64
    }
}

/// One ranked query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryRank {
    pub query: usize,
    pub correct_reference: usize,
    /// 1-based; equal scores share the best rank.
    pub rank: usize,
    pub candidates: usize,
}

impl QueryRank {
    pub fn percentile(&self) -> f64 {
        percentile_rank(self.rank, self.candidates)
    }
}

#[derive(Clone, Debug)]
pub struct RankingDistribution {
    pub variant: Variant,
    pub ranks: Vec<QueryRank>,
    /// Queries with no in-range ground truth.
    pub skipped: usize,
    pub bins: usize,
}

impl RankingDistribution {
    pub fn percentiles(&self) -> Vec<f64> {
        self.ranks.iter().map(QueryRank::percentile).collect()
    }

    pub fn mean_percentile(&self) -> f64 {
        if self.ranks.is_empty() {
            return f64::NAN;
        }
        self.ranks.iter().map(QueryRank::percentile).sum::<f64>() / self.ranks.len() as f64
    }

    pub fn top1_fraction(&self) -> f64 {
        self.fraction(|r| r.rank == 1)
    }

    /// Share of queries whose percentile is at most `num / den`.
    pub fn fraction_within(&self, num: usize, den: usize) -> f64 {
        self.fraction(|r| within(r, num, den))
    }

    fn fraction(&self, pred: impl Fn(&QueryRank) -> bool) -> f64 {
        if self.ranks.is_empty() {
            return 0.0;
        }
        self.ranks.iter().filter(|r| pred(r)).count() as f64 / self.ranks.len() as f64
    }

    /// Counts per equal-width percentile bin; the last bin is closed.
    pub fn histogram(&self) -> Vec<(f64, f64, usize)> {
        let mut counts = vec![0usize; self.bins];
        for r in &self.ranks {
            let bin = if r.candidates <= 1 {
                0
            } else {
                ((r.rank - 1) * self.bins / (r.candidates - 1)).min(self.bins - 1)
            };
            counts[bin] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| {
                (
                    b as f64 / self.bins as f64,
                    (b + 1) as f64 / self.bins as f64,
                    c,
                )
            })
            .collect()
    }

    /// `(top_percent, fraction)` at each bin edge; reaches 1 at 100%.
    pub fn cumulative(&self) -> Vec<(f64, f64)> {
        (1..=self.bins)
            .map(|b| {
                (
                    100.0 * b as f64 / self.bins as f64,
                    self.fraction_within(b, self.bins),
                )
            })
            .collect()
    }
}

// percentile <= num/den, compared exactly
fn within(r: &QueryRank, num: usize, den: usize) -> bool {
    r.candidates <= 1 || (r.rank - 1) * den <= num * (r.candidates - 1)
}

/// Ranks the ground-truth reference among all single-image scores for
/// every query.
///
/// `store` and `queries` must already be preprocessed for `variant`
/// (patch-normalized or raw); neighborhood normalization with
/// `half_window` is applied here when the variant calls for it. A query's
/// frame is its template's source index.
pub fn rank_queries(
    store: &TemplateStore,
    queries: &[Template],
    gt: &GroundTruth,
    variant: Variant,
    half_window: usize,
    bins: usize,
    exec: Execution,
) -> Result<RankingDistribution> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if store.is_empty() {
        return Err(Error::invalid("cannot rank against an empty store"));
    }
    let rank_one = |q: &Template| -> Result<Option<QueryRank>> {
        let Ok(truth) = gt.interpolate(q.source_index() as f64) else {
            return Ok(None);
        };
        let correct = round_half_up(truth);
        if correct < 0.0 || correct >= store.len() as f64 {
            return Ok(None);
        }
        let correct = correct as usize;
        let mut scores = difference_vector(store, q, Execution::Serial)?.scores;
        if variant.neighborhood_normalized() && scores.len() >= 2 {
            scores = normalize_scores(&scores, half_window);
        }
        let target = scores[correct];
        let rank = 1 + scores.iter().filter(|&&s| s < target).count();
        Ok(Some(QueryRank {
            query: q.source_index(),
            correct_reference: correct,
            rank,
            candidates: scores.len(),
        }))
    };
    let ranked: Vec<Option<QueryRank>> = match exec {
        Execution::Serial => queries.iter().map(rank_one).collect::<Result<_>>()?,
        Execution::Parallel => queries.par_iter().map(rank_one).collect::<Result<_>>()?,
    };
    let skipped = ranked.iter().filter(|r| r.is_none()).count();
    Ok(RankingDistribution {
        variant,
        ranks: ranked.into_iter().flatten().collect(),
        skipped,
        bins,
    })
}
