//! End-to-end runs: preprocess frames, learn a reference store, match a
//! query traverse against it.

use crate::blur::{self, BlurSpec};
use crate::eval::{sweep_threshold, EvalReport, GroundTruth};
use crate::imaging::{self, CropRect, GrayImage, RawImage, Template};
use crate::matching::{
    difference_vector, neighborhood_normalize, DifferenceMatrix, TemplateStore, DEFAULT_HALF_WINDOW,
};
use crate::sequence::{best_match, SequenceMatch, SlopeConfig};
use crate::{Error, Execution, Result};

/// Frame to template conversion: grayscale, optional crop, area
/// downsample, patch normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Preprocessor {
    pub crop: Option<CropRect>,
    pub rx: usize,
    pub ry: usize,
    pub n_p: usize,
}

impl Preprocessor {
    pub fn new(crop: Option<CropRect>, rx: usize, ry: usize, n_p: usize) -> Result<Self> {
        if rx == 0 || ry == 0 || n_p == 0 || !rx.is_multiple_of(n_p) || !ry.is_multiple_of(n_p) {
            return Err(Error::invalid(format!(
                "template size {rx}x{ry} must be divisible by patch side {n_p}"
            )));
        }
        Ok(Self { crop, rx, ry, n_p })
    }

    /// Grayscale, crop and downsample, without normalization.
    pub fn reduce(&self, raw: &RawImage) -> Result<GrayImage> {
        self.reduce_gray(&imaging::to_grayscale(raw)?)
    }

    pub fn reduce_gray(&self, gray: &GrayImage) -> Result<GrayImage> {
        let cropped;
        let img = match self.crop {
            Some(rect) => {
                cropped = imaging::crop(gray, rect)?;
                &cropped
            }
            None => gray,
        };
        imaging::downsample(img, self.rx, self.ry)
    }

    pub fn template(&self, raw: &RawImage, index: usize) -> Result<Template> {
        imaging::patch_normalize(&self.reduce(raw)?, self.n_p, index)
    }

    pub fn template_from_gray(&self, gray: &GrayImage, index: usize) -> Result<Template> {
        imaging::patch_normalize(&self.reduce_gray(gray)?, self.n_p, index)
    }

    /// Templates for every frame, indexed by position.
    pub fn templates(&self, frames: &[GrayImage], patch_normalized: bool) -> Result<Vec<Template>> {
        frames
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let small = self.reduce_gray(f)?;
                if patch_normalized {
                    imaging::patch_normalize(&small, self.n_p, i)
                } else {
                    Ok(Template::from_gray(&small, i))
                }
            })
            .collect()
    }

    /// Store holding `templates` in order. Unnormalized templates get a
    /// patch side of 1.
    pub fn store(&self, templates: Vec<Template>, patch_normalized: bool) -> Result<TemplateStore> {
        let n_p = if patch_normalized { self.n_p } else { 1 };
        let mut store = TemplateStore::new(self.rx, self.ry, n_p)?;
        for t in templates {
            store.push(t)?;
        }
        Ok(store)
    }
}

/// Sequence search settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    /// Frames per sequence.
    pub sequence_length: usize,
    pub half_window: usize,
    pub slopes: SlopeConfig,
    /// Acceptance threshold on the trajectory score.
    pub threshold: f64,
    pub exec: Execution,
}

impl MatchParams {
    pub fn new(sequence_length: usize) -> Self {
        Self {
            sequence_length,
            half_window: DEFAULT_HALF_WINDOW,
            slopes: SlopeConfig::default(),
            threshold: f64::INFINITY,
            exec: Execution::Parallel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sequence_length == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        if self.half_window == 0 {
            return Err(Error::invalid(
                "neighborhood half-window must be at least 1",
            ));
        }
        self.slopes.validate()
    }
}

/// Matches every query frame against the full reference `store`.
///
/// Query frame `i` is `queries[i]`. One match is returned per frame from
/// the first full sequence on, so the result has
/// `queries.len() - sequence_length + 1` entries (or none).
pub fn match_traverse(
    store: &TemplateStore,
    queries: &[Template],
    params: &MatchParams,
) -> Result<Vec<SequenceMatch>> {
    params.validate()?;
    if store.is_empty() {
        return Err(Error::invalid("reference store is empty"));
    }
    let mut matrix = DifferenceMatrix::new(params.sequence_length)?;
    let mut out = Vec::with_capacity(queries.len().saturating_sub(params.sequence_length - 1));
    for (i, q) in queries.iter().enumerate() {
        let mut vec = difference_vector(store, q, params.exec)?;
        vec.query_index = i;
        matrix.push_column(neighborhood_normalize(&vec, params.half_window)?)?;
        if matrix.is_full() {
            out.push(best_match(
                &matrix,
                &params.slopes,
                params.threshold,
                params.exec,
            )?);
        }
    }
    Ok(out)
}

/// Single-stream localizer that learns every frame it sees and matches it
/// against all earlier frames.
#[derive(Clone, Debug)]
pub struct OnlineLocalizer {
    store: TemplateStore,
    matrix: DifferenceMatrix,
    params: MatchParams,
}

impl OnlineLocalizer {
    pub fn new(rx: usize, ry: usize, n_p: usize, params: MatchParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            store: TemplateStore::new(rx, ry, n_p)?,
            matrix: DifferenceMatrix::new(params.sequence_length)?,
            params,
        })
    }

    pub fn store(&self) -> &TemplateStore {
        &self.store
    }

    pub fn matrix(&self) -> &DifferenceMatrix {
        &self.matrix
    }

    /// Compares `template` to every learned template, learns it, and
    /// searches for a sequence once enough frames have been seen.
    pub fn process(&mut self, template: Template) -> Result<Option<SequenceMatch>> {
        let mut vec = difference_vector(&self.store, &template, self.params.exec)?;
        vec.query_index = self.store.len();
        let vec = neighborhood_normalize(&vec, self.params.half_window)?;
        self.matrix.push_column(vec)?;
        self.store.push(template)?;
        if !self.matrix.is_full() {
            return Ok(None);
        }
        best_match(
            &self.matrix,
            &self.params.slopes,
            self.params.threshold,
            self.params.exec,
        )
        .map(Some)
    }
}

/// Reference frames per query frame, from mean frame spacings when known
/// and otherwise from frame counts over a shared route.
pub fn frame_rate_ratio(
    query_spacing: Option<f64>,
    reference_spacing: Option<f64>,
    query_frames: usize,
    reference_frames: usize,
) -> Result<f64> {
    let ratio = match (query_spacing, reference_spacing) {
        (Some(q), Some(r)) => q / r,
        _ => reference_frames as f64 / query_frames as f64,
    };
    if ratio.is_finite() && ratio > 0.0 {
        Ok(ratio)
    } else {
        Err(Error::invalid("cannot derive the frame rate ratio"))
    }
}

/// Moves each match of a blurred run onto the query frame its trailing
/// window ends at, so it can be scored against unblurred ground truth.
pub fn realign_blurred(matches: &mut [SequenceMatch], spec: &BlurSpec) {
    for m in matches {
        m.query_center_index += spec.window() - 1;
    }
}

/// Outcome of matching one blurred query set.
#[derive(Clone, Debug)]
pub struct BlurPoint {
    pub spec: BlurSpec,
    /// Zero-false-positive threshold with the highest recall.
    pub threshold: f64,
    pub report: EvalReport,
    /// Lag of the matches in query frames, measured against the sharpest
    /// run of the sweep. Filled in by [`blur_lags`].
    pub lag_frames: f64,
    /// Matches of the run, realigned to unblurred query frames.
    pub matches: Vec<SequenceMatch>,
}

/// Matches already-blurred query `frames` and scores them at the best
/// zero-false-positive threshold.
pub fn score_blurred(
    pre: &Preprocessor,
    store: &TemplateStore,
    blurred: &[GrayImage],
    spec: BlurSpec,
    truth: &GroundTruth,
    params: &MatchParams,
    fp_tolerance: f64,
) -> Result<BlurPoint> {
    // stores of raw templates are built with a patch side of 1
    let queries = pre.templates(blurred, store.n_p() > 1)?;
    let mut matches = match_traverse(store, &queries, params)?;
    realign_blurred(&mut matches, &spec);
    let sweep = sweep_threshold(&matches, blurred.len(), truth, fp_tolerance, None);
    let (threshold, report) = sweep.best;
    Ok(BlurPoint {
        spec,
        threshold,
        report,
        lag_frames: f64::NAN,
        matches,
    })
}

/// Converts each point's mean lag to query frames, measured from the point
/// with the smallest window.
///
/// The matcher has a small fixed offset of its own, from rounding the
/// trajectory to whole reference rows, so the sharpest run is taken to lag
/// by exactly its expected amount and the others are measured from it.
pub fn blur_lags(points: &mut [BlurPoint], v_av: f64) {
    let Some((base, base_lag)) = points
        .iter()
        .min_by_key(|p| p.spec.window())
        .map(|p| (p.report.mean_lag_frames, blur::expected_lag(&p.spec)))
    else {
        return;
    };
    for p in points {
        p.lag_frames = if p.report.correct_count > 0 {
            (p.report.mean_lag_frames - base) / v_av + base_lag
        } else {
            f64::NAN
        };
    }
}

/// Blurs `query` at every spec in turn, matches each blurred set against
/// `store`, and annotates the lags.
pub fn blur_sweep(
    pre: &Preprocessor,
    store: &TemplateStore,
    query: &[GrayImage],
    specs: &[BlurSpec],
    truth: &GroundTruth,
    params: &MatchParams,
    fp_tolerance: f64,
) -> Result<Vec<BlurPoint>> {
    let mut points = specs
        .iter()
        .map(|&spec| {
            let blurred = blur::temporal_blur(query, &spec)?;
            score_blurred(pre, store, &blurred, spec, truth, params, fp_tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    blur_lags(&mut points, params.slopes.v_av);
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(count: usize) -> Vec<GrayImage> {
        (0..count)
            .map(|k| {
                let px = (0..16 * 8)
                    .map(|i| (((i * 31 + k * 17) ^ (i * k + 5)) % 251) as u8)
                    .collect();
                GrayImage::new(16, 8, px).unwrap()
            })
            .collect()
    }

    #[test]
    fn preprocessor_validates_geometry() {
        assert!(Preprocessor::new(None, 64, 48, 8).is_ok());
        assert!(Preprocessor::new(None, 60, 48, 8).is_err());
    }

    #[test]
    fn crop_then_downsample() {
        let p = Preprocessor::new(Some(CropRect::new(8, 0, 8, 8)), 4, 4, 2).unwrap();
        let f = &frames(1)[0];
        let small = p.reduce_gray(f).unwrap();
        let manual =
            imaging::downsample(&imaging::crop(f, CropRect::new(8, 0, 8, 8)).unwrap(), 4, 4)
                .unwrap();
        assert_eq!(small, manual);
    }

    #[test]
    fn self_match_lies_on_the_diagonal() {
        let p = Preprocessor::new(None, 16, 8, 4).unwrap();
        let f = frames(30);
        let templates = p.templates(&f, true).unwrap();
        let store = p.store(templates.clone(), true).unwrap();
        let params = MatchParams::new(5);
        let matches = match_traverse(&store, &templates, &params).unwrap();
        assert_eq!(matches.len(), 26);
        for m in &matches {
            assert_eq!(m.reference_center_index, m.query_center_index);
        }
    }

    #[test]
    fn too_few_frames_yield_nothing() {
        let p = Preprocessor::new(None, 16, 8, 4).unwrap();
        let templates = p.templates(&frames(4), true).unwrap();
        let store = p.store(templates.clone(), true).unwrap();
        assert!(match_traverse(&store, &templates, &MatchParams::new(5))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn online_vectors_grow_and_pad() {
        let p = Preprocessor::new(None, 16, 8, 4).unwrap();
        let mut loc = OnlineLocalizer::new(16, 8, 4, MatchParams::new(3)).unwrap();
        for (i, f) in frames(6).iter().enumerate() {
            let out = loc.process(p.template_from_gray(f, i).unwrap()).unwrap();
            assert_eq!(out.is_some(), i >= 2);
            assert_eq!(loc.matrix().height(), i);
        }
        // columns for frames 3, 4, 5 have lengths 3, 4, 5
        assert_eq!(loc.matrix().column_len(0), 3);
        assert_eq!(loc.matrix().padded_column(0)[4], crate::matching::Cell::Pad);
    }

    #[test]
    fn frame_rate_ratio_sources() {
        assert_eq!(frame_rate_ratio(Some(13.1), Some(13.1), 1, 1).unwrap(), 1.0);
        assert_eq!(frame_rate_ratio(Some(4.0), Some(2.0), 10, 10).unwrap(), 2.0);
        assert_eq!(frame_rate_ratio(None, Some(2.0), 200, 100).unwrap(), 0.5);
        assert!(frame_rate_ratio(None, None, 0, 10).is_err());
    }
}
