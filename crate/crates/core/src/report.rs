//! CSV output with byte-stable float formatting.

use std::io::Write;

use crate::blur::expected_lag;
use crate::eval::{EvalReport, RankingDistribution, ThresholdSweep};
use crate::pipeline::BlurPoint;
use crate::{Result, SequenceMatch};

/// Fixed-point rendering with six significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn write_matches<W: Write>(w: W, matches: &[SequenceMatch]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "query_index",
        "reference_index",
        "slope",
        "score",
        "accepted",
    ])?;
    for m in matches {
        out.write_record([
            m.query_center_index.to_string(),
            m.reference_center_index.to_string(),
            fmt_float(m.slope),
            fmt_float(m.score),
            u8::from(m.accepted).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Parses what [`write_matches`] produced. The start row is not stored and
/// comes back equal to the reference index.
pub fn read_matches<R: std::io::Read>(r: R) -> Result<Vec<SequenceMatch>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = || crate::Error::invalid(format!("bad match row {rec:?}"));
        let reference: usize = field(1).parse().map_err(|_| bad())?;
        out.push(SequenceMatch {
            query_center_index: field(0).parse().map_err(|_| bad())?,
            reference_center_index: reference,
            reference_start_index: reference,
            slope: field(2).parse().map_err(|_| bad())?,
            score: field(3).parse().map_err(|_| bad())?,
            accepted: match field(4) {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(bad()),
            },
        });
    }
    Ok(out)
}

/// One `metric,value` row per report field.
pub fn write_report<W: Write>(w: W, report: &EvalReport, extra: &[(&str, String)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "value"])?;
    for (k, v) in extra {
        out.write_record([*k, v.as_str()])?;
    }
    for (k, v) in report_fields(report) {
        out.write_record([k, v.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

fn report_fields(r: &EvalReport) -> Vec<(&'static str, String)> {
    vec![
        ("total_frames", r.total_frames.to_string()),
        ("warm_up_frames", r.warm_up_frames.to_string()),
        ("accepted", r.accepted_count.to_string()),
        ("correct", r.correct_count.to_string()),
        ("false_positives", r.false_positive_count.to_string()),
        ("unscored", r.unscored_count.to_string()),
        ("recall", fmt_float(r.recall)),
        ("mean_error_frames", fmt_float(r.mean_error_frames)),
        ("max_error_frames", fmt_float(r.max_error_frames)),
        ("mean_error_meters", fmt_float(r.mean_error_meters)),
        ("max_error_meters", fmt_float(r.max_error_meters)),
        ("mean_lag_frames", fmt_float(r.mean_lag_frames)),
    ]
}

pub fn write_sweep<W: Write>(w: W, sweep: &ThresholdSweep) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "threshold",
        "recall",
        "accepted",
        "false_positives",
        "mean_error_frames",
        "max_error_frames",
    ])?;
    for (t, r) in &sweep.points {
        out.write_record([
            fmt_float(*t),
            fmt_float(r.recall),
            r.accepted_count.to_string(),
            r.false_positive_count.to_string(),
            fmt_float(r.mean_error_frames),
            fmt_float(r.max_error_frames),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `query,reported,truth` for accepted matches; truth is empty outside the
/// ground truth range.
pub fn write_matches_vs_truth<W: Write>(
    w: W,
    matches: &[SequenceMatch],
    truth: impl Fn(usize) -> Option<f64>,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["query", "reported", "truth"])?;
    for m in matches.iter().filter(|m| m.accepted) {
        out.write_record([
            m.query_center_index.to_string(),
            m.reference_center_index.to_string(),
            truth(m.query_center_index)
                .map(fmt_float)
                .unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rank_histogram<W: Write>(w: W, dist: &RankingDistribution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin_low", "bin_high", "count"])?;
    for (lo, hi, c) in dist.histogram() {
        out.write_record([fmt_float(lo), fmt_float(hi), c.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rank_cumulative<W: Write>(w: W, dist: &RankingDistribution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["top_percent", "fraction"])?;
    for (top, frac) in dist.cumulative() {
        out.write_record([fmt_float(top), fmt_float(frac)])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per exposure: recall and error at the best zero-false-positive
/// threshold, with the expected and measured lag in query frames.
pub fn write_blur_sweep<W: Write>(w: W, points: &[BlurPoint]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "exposure_ms",
        "window",
        "expected_lag",
        "measured_lag",
        "threshold",
        "recall",
        "false_positives",
        "mean_error_frames",
        "max_error_frames",
        "mean_error_meters",
        "max_error_meters",
    ])?;
    for p in points {
        let r = &p.report;
        out.write_record([
            fmt_float(p.spec.simulated_exposure_ms),
            p.spec.window().to_string(),
            fmt_float(expected_lag(&p.spec)),
            fmt_float(p.lag_frames),
            fmt_float(p.threshold),
            fmt_float(r.recall),
            r.false_positive_count.to_string(),
            fmt_float(r.mean_error_frames),
            fmt_float(r.max_error_frames),
            fmt_float(r.mean_error_meters),
            fmt_float(r.max_error_meters),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Headline numbers of several ranking distributions, one row each.
pub fn write_rank_summary<W: Write>(w: W, dists: &[RankingDistribution]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "variant",
        "queries",
        "skipped",
        "mean_percentile",
        "top1",
        "top10_percent",
        "top20_percent",
        "top50_percent",
    ])?;
    for d in dists {
        out.write_record([
            d.variant.name().to_string(),
            d.ranks.len().to_string(),
            d.skipped.to_string(),
            fmt_float(d.mean_percentile()),
            fmt_float(d.top1_fraction()),
            fmt_float(d.fraction_within(10, 100)),
            fmt_float(d.fraction_within(20, 100)),
            fmt_float(d.fraction_within(50, 100)),
        ])?;
    }
    out.flush()?;
    Ok(())
}
