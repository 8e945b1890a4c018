use super::GroundTruth;
use crate::SequenceMatch;

/// Recall and localization error of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    /// Query frames in the run, warm-up included.
    pub total_frames: usize,
    /// Frames that produced no match because the sequence was not yet full.
    pub warm_up_frames: usize,
    pub accepted_count: usize,
    /// Accepted matches within the false-positive tolerance.
    pub correct_count: usize,
    pub false_positive_count: usize,
    /// Accepted matches whose query frame lies outside the ground truth.
    pub unscored_count: usize,
    pub recall: f64,
    pub mean_error_frames: f64,
    pub max_error_frames: f64,
    pub mean_error_meters: f64,
    pub max_error_meters: f64,
    /// Mean of `truth - reported` over correct matches; positive when the
    /// reported reference frames trail the truth.
    pub mean_lag_frames: f64,
}

/// Scores accepted matches against `gt`.
///
/// Recall is the number of accepted matches within `fp_tolerance` frames of
/// the truth over all `total_frames` query frames. Error statistics cover
/// those correct matches only.
pub fn score_matches(
    matches: &[SequenceMatch],
    total_frames: usize,
    gt: &GroundTruth,
    fp_tolerance: f64,
) -> EvalReport {
    let mut report = EvalReport {
        total_frames,
        warm_up_frames: total_frames.saturating_sub(matches.len()),
        ..Default::default()
    };
    let mut err_sum = 0.0;
    let mut lag_sum = 0.0;
    for m in matches.iter().filter(|m| m.accepted) {
        report.accepted_count += 1;
        let Ok(truth) = gt.interpolate(m.query_center_index as f64) else {
            report.unscored_count += 1;
            continue;
        };
        let offset = truth - m.reference_center_index as f64;
        let err = offset.abs();
        if err > fp_tolerance {
            report.false_positive_count += 1;
            continue;
        }
        report.correct_count += 1;
        err_sum += err;
        lag_sum += offset;
        report.max_error_frames = report.max_error_frames.max(err);
    }
    if total_frames > 0 {
        report.recall = report.correct_count as f64 / total_frames as f64;
    }
    if report.correct_count > 0 {
        report.mean_error_frames = err_sum / report.correct_count as f64;
        report.mean_lag_frames = lag_sum / report.correct_count as f64;
    }
    report.mean_error_meters = report.mean_error_frames * gt.reference_spacing;
    report.max_error_meters = report.max_error_frames * gt.reference_spacing;
    report
}

/// Reports over a range of acceptance thresholds.
#[derive(Clone, Debug)]
pub struct ThresholdSweep {
    /// `(s_m, report)` in ascending threshold order.
    pub points: Vec<(f64, EvalReport)>,
    /// Highest-recall point without false positives; the lowest threshold
    /// wins ties.
    pub best: (f64, EvalReport),
}

/// Thresholds at which the accepted set changes: `-inf`, just above every
/// distinct finite match score, and `+inf`.
pub fn candidate_thresholds(matches: &[SequenceMatch]) -> Vec<f64> {
    let mut scores: Vec<f64> = matches
        .iter()
        .map(|m| m.score)
        .filter(|s| s.is_finite())
        .collect();
    scores.sort_by(f64::total_cmp);
    scores.dedup();
    let mut out = Vec::with_capacity(scores.len() + 2);
    out.push(f64::NEG_INFINITY);
    out.extend(scores.into_iter().map(f64::next_up));
    out.push(f64::INFINITY);
    out
}

/// Re-thresholds `matches` at every value in `thresholds` (or at
/// [`candidate_thresholds`] when `None`) and scores each result.
pub fn sweep_threshold(
    matches: &[SequenceMatch],
    total_frames: usize,
    gt: &GroundTruth,
    fp_tolerance: f64,
    thresholds: Option<&[f64]>,
) -> ThresholdSweep {
    let mut thresholds = match thresholds {
        Some(t) => t.to_vec(),
        None => candidate_thresholds(matches),
    };
    thresholds.sort_by(f64::total_cmp);
    if thresholds.first() != Some(&f64::NEG_INFINITY) {
        thresholds.insert(0, f64::NEG_INFINITY);
    }
    let mut rethresholded = matches.to_vec();
    let points: Vec<(f64, EvalReport)> = thresholds
        .into_iter()
        .map(|s_m| {
            for (m, orig) in rethresholded.iter_mut().zip(matches) {
                *m = orig.with_threshold(s_m);
            }
            (
                s_m,
                score_matches(&rethresholded, total_frames, gt, fp_tolerance),
            )
        })
        .collect();
    let best = points
        .iter()
        .filter(|(_, r)| r.false_positive_count == 0)
        .fold(None::<&(f64, EvalReport)>, |best, p| match best {
            Some(b) if b.1.recall >= p.1.recall => Some(b),
            _ => Some(p),
        })
        .cloned()
        .expect("-inf threshold accepts nothing");
    ThresholdSweep { points, best }
}
