//! The batch subcommands. Each one checks its inputs up front, then writes
//! everything under a run directory together with a manifest of the
//! resolved configuration.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, ensure, Context, Result};
use log::info;
use seqmatch::eval::{
    rank_queries, score_matches, sweep_threshold, GroundTruth, RankingDistribution, Variant,
};
use seqmatch::imaging::to_grayscale;
use seqmatch::pipeline::{
    blur_lags, frame_rate_ratio, match_traverse, score_blurred, BlurPoint, MatchParams,
    OnlineLocalizer, Preprocessor,
};
use seqmatch::{blur, io, report, CropRect, GrayImage, SequenceMatch, Template, TemplateStore};

use crate::config::RunConfig;

pub const MANIFEST: &str = "manifest.txt";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("creating {}", path.display()))
}

/// Writes the resolved configuration; it can be fed back with `--config`.
fn write_manifest(out: &Path, command: &str, cfg: &RunConfig) -> Result<()> {
    let text = format!(
        "# seqmatch {} {command}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_text()
    );
    fs::write(out.join(MANIFEST), text).context("writing manifest")
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating run directory {}", out.display()))
}

fn require_dir<'a>(dir: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let dir = dir.as_deref().ok_or_else(|| anyhow!("{key} is not set"))?;
    ensure!(dir.is_dir(), "{key} {} is not a directory", dir.display());
    Ok(dir)
}

fn require_file<'a>(file: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let file = file.as_deref().ok_or_else(|| anyhow!("{key} is not set"))?;
    ensure!(file.is_file(), "{key} {} does not exist", file.display());
    Ok(file)
}

fn frame_count(dir: &Path) -> Result<usize> {
    Ok(io::list_frames(dir)?.len())
}

fn load_gray(dir: &Path) -> Result<Vec<GrayImage>> {
    let start = Instant::now();
    let frames = io::read_frames(dir)?
        .iter()
        .map(to_grayscale)
        .collect::<seqmatch::Result<Vec<_>>>()?;
    info!(
        "read {} frames from {} in {:.2?}",
        frames.len(),
        dir.display(),
        start.elapsed()
    );
    Ok(frames)
}

fn preprocessor(cfg: &RunConfig, crop: Option<CropRect>) -> Result<Preprocessor> {
    Ok(Preprocessor::new(crop, cfg.rx, cfg.ry, cfg.n_p)?)
}

fn templates(
    cfg: &RunConfig,
    dir: &Path,
    crop: Option<CropRect>,
    patch: bool,
) -> Result<Vec<Template>> {
    Ok(preprocessor(cfg, crop)?.templates(&load_gray(dir)?, patch)?)
}

fn load_truth(cfg: &RunConfig) -> Result<Option<GroundTruth>> {
    let Some(path) = &cfg.ground_truth else {
        return Ok(None);
    };
    let gt = GroundTruth::load(
        path,
        cfg.query_spacing.unwrap_or(1.0),
        cfg.reference_spacing.unwrap_or(1.0),
    )
    .with_context(|| format!("loading ground truth {}", path.display()))?;
    Ok(Some(gt))
}

/// Reference store from `reference_store` if set, else built from
/// `reference_dir`.
fn reference_store(cfg: &RunConfig, patch: bool) -> Result<TemplateStore> {
    if let Some(path) = &cfg.reference_store {
        let store =
            TemplateStore::load(path).with_context(|| format!("loading {}", path.display()))?;
        let n_p = if patch { cfg.n_p } else { 1 };
        ensure!(
            (store.rx(), store.ry(), store.n_p()) == (cfg.rx, cfg.ry, n_p),
            "store {} holds {}x{} templates with patch side {}, configuration asks for {}x{} with {}",
            path.display(),
            store.rx(),
            store.ry(),
            store.n_p(),
            cfg.rx,
            cfg.ry,
            n_p
        );
        return Ok(store);
    }
    let dir = require_dir(&cfg.reference_dir, "reference_dir")?;
    let pre = preprocessor(cfg, cfg.reference_crop)?;
    Ok(pre.store(templates(cfg, dir, cfg.reference_crop, patch)?, patch)?)
}

fn reference_frames(cfg: &RunConfig) -> Result<usize> {
    match &cfg.reference_store {
        Some(path) => Ok(TemplateStore::load(path)?.len()),
        None => frame_count(require_dir(&cfg.reference_dir, "reference_dir")?),
    }
}

/// Checks the inputs of a reference-versus-query run before any frame is
/// decoded, and resolves `v_av`.
fn check_pair(cfg: &RunConfig) -> Result<f64> {
    cfg.validate()?;
    let query_frames = frame_count(require_dir(&cfg.query_dir, "query_dir")?)?;
    let reference_frames = match &cfg.reference_store {
        Some(_) => {
            require_file(&cfg.reference_store, "reference_store")?;
            reference_frames(cfg)?
        }
        None => reference_frames(cfg)?,
    };
    if cfg.ground_truth.is_some() {
        require_file(&cfg.ground_truth, "ground_truth")?;
    }
    ensure!(reference_frames > 0, "the reference holds no frames");
    ensure!(
        query_frames >= cfg.sequence_length,
        "not ready: {query_frames} query frames, a sequence needs {}",
        cfg.sequence_length
    );
    let v_av = match cfg.v_av {
        Some(v) => v,
        None => frame_rate_ratio(
            cfg.query_spacing,
            cfg.reference_spacing,
            query_frames,
            reference_frames,
        )?,
    };
    Ok(v_av)
}

fn match_params(cfg: &RunConfig, v_av: f64) -> MatchParams {
    MatchParams {
        sequence_length: cfg.sequence_length,
        half_window: cfg.half_window,
        slopes: cfg.slopes(v_av),
        threshold: cfg.threshold,
        exec: cfg.execution(),
    }
}

/// Writes `report.csv`, `sweep.csv` and `matches_vs_truth.csv`.
fn write_evaluation(
    out: &Path,
    cfg: &RunConfig,
    matches: &[SequenceMatch],
    total_frames: usize,
    gt: &GroundTruth,
    v_av: f64,
) -> Result<seqmatch::eval::EvalReport> {
    let report = score_matches(matches, total_frames, gt, cfg.fp_tolerance);
    let sweep = sweep_threshold(matches, total_frames, gt, cfg.fp_tolerance, None);
    let (best_threshold, best) = &sweep.best;
    report::write_report(
        create(&out.join("report.csv"))?,
        &report,
        &[
            ("threshold", report::fmt_float(cfg.threshold)),
            ("fp_tolerance", report::fmt_float(cfg.fp_tolerance)),
            ("v_av", report::fmt_float(v_av)),
            ("best_zero_fp_threshold", report::fmt_float(*best_threshold)),
            ("best_zero_fp_recall", report::fmt_float(best.recall)),
        ],
    )?;
    report::write_sweep(create(&out.join("sweep.csv"))?, &sweep)?;
    report::write_matches_vs_truth(create(&out.join("matches_vs_truth.csv"))?, matches, |q| {
        gt.interpolate(q as f64).ok()
    })?;
    info!(
        "recall {:.4} at threshold {}, best zero-FP recall {:.4} at {}",
        report.recall,
        cfg.threshold,
        best.recall,
        report::fmt_float(*best_threshold)
    );
    Ok(report)
}

/// Builds template stores: `reference.sqsm` from `reference_dir` and
/// `query.sqsm` from `query_dir`, whichever are set.
pub fn preprocess(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    ensure!(
        cfg.reference_dir.is_some() || cfg.query_dir.is_some(),
        "nothing to preprocess: set reference_dir or query_dir"
    );
    let inputs = [
        (
            &cfg.reference_dir,
            "reference_dir",
            cfg.reference_crop,
            "reference.sqsm",
        ),
        (&cfg.query_dir, "query_dir", cfg.query_crop, "query.sqsm"),
    ];
    for (dir, key, _, _) in &inputs {
        if dir.is_some() {
            require_dir(dir, key)?;
        }
    }
    prepare_out(out)?;
    for (dir, key, crop, name) in inputs {
        if dir.is_none() {
            continue;
        }
        let dir = require_dir(dir, key)?;
        let store = preprocessor(cfg, crop)?.store(templates(cfg, dir, crop, true)?, true)?;
        store.save(out.join(name))?;
        info!("stored {} templates in {name}", store.len());
    }
    write_manifest(out, "preprocess", cfg)
}

/// Matches the query traverse against the reference and, with ground
/// truth, evaluates the result.
pub fn run_match(cfg: &RunConfig, out: &Path) -> Result<Vec<SequenceMatch>> {
    if cfg.online {
        return run_online(cfg, out);
    }
    let v_av = check_pair(cfg)?;
    let gt = load_truth(cfg)?;
    prepare_out(out)?;
    let store = reference_store(cfg, true)?;
    let queries = templates(
        cfg,
        require_dir(&cfg.query_dir, "query_dir")?,
        cfg.query_crop,
        true,
    )?;
    let start = Instant::now();
    let matches = match_traverse(&store, &queries, &match_params(cfg, v_av))?;
    let elapsed = start.elapsed();
    info!(
        "{} query frames against {} references in {:.2?} ({:.1} frames/s)",
        queries.len(),
        store.len(),
        elapsed,
        queries.len() as f64 / elapsed.as_secs_f64().max(1e-9)
    );
    report::write_matches(create(&out.join("matches.csv"))?, &matches)?;
    if let Some(gt) = &gt {
        write_evaluation(out, cfg, &matches, queries.len(), gt, v_av)?;
    }
    let resolved = RunConfig {
        v_av: Some(v_av),
        ..cfg.clone()
    };
    write_manifest(out, "match", &resolved)?;
    Ok(matches)
}

/// Single traverse: every frame is matched against the frames before it.
fn run_online(cfg: &RunConfig, out: &Path) -> Result<Vec<SequenceMatch>> {
    cfg.validate()?;
    let dir = require_dir(&cfg.query_dir, "query_dir")?;
    if cfg.ground_truth.is_some() {
        require_file(&cfg.ground_truth, "ground_truth")?;
    }
    let frames = frame_count(dir)?;
    ensure!(
        frames >= cfg.sequence_length,
        "not ready: {frames} query frames, a sequence needs {}",
        cfg.sequence_length
    );
    let v_av = cfg.v_av.unwrap_or(1.0);
    let gt = load_truth(cfg)?;
    prepare_out(out)?;
    let queries = templates(cfg, dir, cfg.query_crop, true)?;
    let mut localizer = OnlineLocalizer::new(cfg.rx, cfg.ry, cfg.n_p, match_params(cfg, v_av))?;
    let mut matches = Vec::new();
    for t in queries {
        matches.extend(localizer.process(t)?);
    }
    report::write_matches(create(&out.join("matches.csv"))?, &matches)?;
    if let Some(gt) = &gt {
        write_evaluation(out, cfg, &matches, frames, gt, v_av)?;
    }
    let resolved = RunConfig {
        v_av: Some(v_av),
        ..cfg.clone()
    };
    write_manifest(out, "match", &resolved)?;
    Ok(matches)
}

/// Scores an existing `matches.csv` against the ground truth.
///
/// `total_frames` defaults to the number of frames in `query_dir`.
pub fn evaluate(
    cfg: &RunConfig,
    matches_path: &Path,
    total_frames: Option<usize>,
    out: &Path,
) -> Result<()> {
    cfg.validate()?;
    require_file(&cfg.ground_truth, "ground_truth")?;
    ensure!(
        matches_path.is_file(),
        "matches file {} does not exist",
        matches_path.display()
    );
    let total = match total_frames {
        Some(n) => n,
        None => frame_count(require_dir(
            &cfg.query_dir,
            "query_dir (or --total-frames)",
        )?)?,
    };
    let matches = report::read_matches(
        File::open(matches_path).with_context(|| format!("opening {}", matches_path.display()))?,
    )?;
    // re-threshold at the configured level so the report reflects it
    let matches: Vec<SequenceMatch> = matches
        .into_iter()
        .map(|m| m.with_threshold(cfg.threshold))
        .collect();
    ensure!(
        total >= matches.len(),
        "{} matches but only {total} query frames",
        matches.len()
    );
    let gt = load_truth(cfg)?.expect("checked above");
    prepare_out(out)?;
    write_evaluation(out, cfg, &matches, total, &gt, cfg.v_av.unwrap_or(f64::NAN))?;
    write_manifest(out, "eval", cfg)
}

fn exposure_label(ms: f64) -> String {
    report::fmt_float(ms)
        .trim_end_matches('0')
        .trim_end_matches('.')
        .to_string()
}

/// Blurs the query at every configured exposure, matches each blurred set
/// and writes `blur_sweep.csv`, per-exposure matches and the blurred
/// frames themselves.
pub fn run_blur_sweep(cfg: &RunConfig, out: &Path, write_frames: bool) -> Result<Vec<BlurPoint>> {
    let v_av = check_pair(cfg)?;
    let specs = cfg.blur_specs()?;
    require_file(&cfg.ground_truth, "ground_truth")?;
    let query_dir = require_dir(&cfg.query_dir, "query_dir")?;
    let names = io::list_frames(query_dir)?;
    if let Some(s) = specs.iter().find(|s| s.window() > names.len()) {
        bail!(
            "blur window {} exceeds the {} query frames",
            s.window(),
            names.len()
        );
    }
    let gt = load_truth(cfg)?.expect("checked above");
    prepare_out(out)?;
    let store = reference_store(cfg, true)?;
    let query = load_gray(query_dir)?;
    let pre = preprocessor(cfg, cfg.query_crop)?;
    let params = match_params(cfg, v_av);
    let mut points = Vec::with_capacity(specs.len());
    for spec in specs {
        let start = Instant::now();
        let blurred = blur::temporal_blur(&query, &spec)?;
        let label = exposure_label(spec.simulated_exposure_ms);
        if write_frames {
            let dir = out.join(format!("blurred_{label}ms"));
            fs::create_dir_all(&dir)?;
            for (j, frame) in blurred.iter().enumerate() {
                // named after the newest source frame of the window
                io::write_gray_png(dir.join(io::frame_name(j + spec.window() - 1)), frame)?;
            }
        }
        let point = score_blurred(&pre, &store, &blurred, spec, &gt, &params, cfg.fp_tolerance)?;
        report::write_matches(
            create(&out.join(format!("matches_{label}ms.csv")))?,
            &point.matches,
        )?;
        info!(
            "{label} ms (window {}): recall {:.4}, mean error {:.3} frames, {:.2?}",
            spec.window(),
            point.report.recall,
            point.report.mean_error_frames,
            start.elapsed()
        );
        points.push(point);
    }
    blur_lags(&mut points, v_av);
    report::write_blur_sweep(create(&out.join("blur_sweep.csv"))?, &points)?;
    let resolved = RunConfig {
        v_av: Some(v_av),
        ..cfg.clone()
    };
    write_manifest(out, "blur-sweep", &resolved)?;
    Ok(points)
}

/// Ranks the true reference frame of every query under all four
/// normalization variants.
pub fn run_rank_analysis(cfg: &RunConfig, out: &Path) -> Result<Vec<RankingDistribution>> {
    check_pair(cfg)?;
    require_file(&cfg.ground_truth, "ground_truth")?;
    ensure!(
        cfg.reference_store.is_none() || cfg.reference_dir.is_some(),
        "rank-analysis needs reference_dir: raw templates are not kept in stores"
    );
    let gt = load_truth(cfg)?.expect("checked above");
    prepare_out(out)?;
    let reference = load_gray(require_dir(&cfg.reference_dir, "reference_dir")?)?;
    let query = load_gray(require_dir(&cfg.query_dir, "query_dir")?)?;
    let ref_pre = preprocessor(cfg, cfg.reference_crop)?;
    let query_pre = preprocessor(cfg, cfg.query_crop)?;
    let mut dists = Vec::with_capacity(Variant::ALL.len());
    for variant in Variant::ALL {
        let patch = variant.patch_normalized();
        let store = ref_pre.store(ref_pre.templates(&reference, patch)?, patch)?;
        let queries = query_pre.templates(&query, patch)?;
        let dist = rank_queries(
            &store,
            &queries,
            &gt,
            variant,
            cfg.half_window,
            cfg.histogram_bins,
            cfg.execution(),
        )?;
        let name = variant.name();
        report::write_rank_histogram(
            create(&out.join(format!("rank_{name}_histogram.csv")))?,
            &dist,
        )?;
        report::write_rank_cumulative(
            create(&out.join(format!("rank_{name}_cumulative.csv")))?,
            &dist,
        )?;
        info!(
            "{name}: mean percentile {:.4}, top-1 {:.4}",
            dist.mean_percentile(),
            dist.top1_fraction()
        );
        dists.push(dist);
    }
    report::write_rank_summary(create(&out.join("rank_summary.csv"))?, &dists)?;
    write_manifest(out, "rank-analysis", cfg)?;
    Ok(dists)
}
