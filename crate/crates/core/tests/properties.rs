use proptest::prelude::*;

use seqmatch::blur::{temporal_blur, BlurSpec};
use seqmatch::eval::{score_matches, sweep_threshold, GroundTruth};
use seqmatch::imaging::{crop, downsample, patch_normalize_values};
use seqmatch::matching::{
    difference_vector, neighborhood_normalize, sad_difference, Cell, DifferenceMatrix,
};
use seqmatch::sequence::{best_match, SequenceMatch};
use seqmatch::{
    CropRect, DifferenceVector, Execution, GrayImage, SlopeConfig, Template, TemplateStore,
};

fn template(values: Vec<f64>) -> Template {
    let n = values.len();
    Template::new(n, 1, values, 0).unwrap()
}

fn gray(width: usize, height: usize) -> impl Strategy<Value = GrayImage> {
    prop::collection::vec(any::<u8>(), width * height)
        .prop_map(move |px| GrayImage::new(width, height, px).unwrap())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs()))
}

/// Columns of non-decreasing length, as produced by online matching.
fn matrix_strategy() -> impl Strategy<Value = (DifferenceMatrix, f64)> {
    (1usize..=20, 1usize..=50, 0usize..4, 0.3f64..2.5)
        .prop_flat_map(|(cols, rows, grow, v_av)| {
            let lens: Vec<usize> = (0..cols).map(|c| rows + (c * grow) / 3).collect();
            let cells = lens
                .iter()
                .map(|&len| {
                    prop::collection::vec((-4i32..=4).prop_map(|v| f64::from(v) * 0.5), len)
                })
                .collect::<Vec<_>>();
            (cells, Just(v_av))
        })
        .prop_map(|(cells, v_av)| {
            let mut m = DifferenceMatrix::new(cells.len()).unwrap();
            for (i, scores) in cells.into_iter().enumerate() {
                m.push_column(DifferenceVector {
                    query_index: i,
                    scores,
                })
                .unwrap();
            }
            (m, v_av)
        })
}

/// Independent exhaustive search: every start row of the oldest column,
/// every slope, rows by round-half-up, lexicographic (score, start, slope).
fn oracle(m: &DifferenceMatrix, slopes: &[f64], v_av: f64) -> Option<(f64, usize, usize)> {
    let n = m.width();
    let mut best: Option<(f64, usize, usize)> = None;
    for start in 0..m.column_len(0) {
        'slope: for (k, &s) in slopes.iter().enumerate() {
            let mut sum = 0.0;
            for t in 0..n {
                let row = (start as f64 + s * v_av * t as f64 + 0.5).floor();
                if row < 0.0 || row >= m.height() as f64 {
                    continue 'slope;
                }
                match m.padded_column(t)[row as usize] {
                    Cell::Score(v) => sum += v,
                    Cell::Pad => continue 'slope,
                }
            }
            let cand = (sum / n as f64, start, k);
            let better = match best {
                None => true,
                Some(b) => cand.0 < b.0 || (cand.0 == b.0 && (cand.1, cand.2) < (b.1, b.2)),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

fn shifted(
    m: &DifferenceMatrix,
    f: impl Fn(f64) -> f64,
    prepend: usize,
    fill: f64,
) -> DifferenceMatrix {
    let columns = (0..m.width())
        .map(|c| {
            let mut col = vec![fill; prepend];
            col.extend(
                m.padded_column(c)
                    .into_iter()
                    .filter_map(|cell| match cell {
                        Cell::Score(v) => Some(f(v)),
                        Cell::Pad => None,
                    }),
            );
            col
        })
        .collect::<Vec<_>>();
    let mut out = DifferenceMatrix::new(columns.len()).unwrap();
    for (i, scores) in columns.into_iter().enumerate() {
        out.push_column(DifferenceVector {
            query_index: i,
            scores,
        })
        .unwrap();
    }
    out
}

fn gradient_energy(img: &GrayImage) -> f64 {
    let mut e = 0.0;
    for y in 0..img.height() {
        for x in 0..img.width() {
            let p = f64::from(img.get(x, y));
            if x + 1 < img.width() {
                e += (f64::from(img.get(x + 1, y)) - p).powi(2);
            }
            if y + 1 < img.height() {
                e += (f64::from(img.get(x, y + 1)) - p).powi(2);
            }
        }
    }
    e
}

proptest! {
    #[test]
    fn sad_is_a_metric(
        a in prop::collection::vec(-50.0f64..50.0, 16),
        b in prop::collection::vec(-50.0f64..50.0, 16),
        c in prop::collection::vec(-50.0f64..50.0, 16),
    ) {
        let (a, b, c) = (template(a), template(b), template(c));
        let ab = sad_difference(&a, &b).unwrap();
        prop_assert_eq!(sad_difference(&a, &a).unwrap(), 0.0);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, sad_difference(&b, &a).unwrap());
        let ac = sad_difference(&a, &c).unwrap();
        let cb = sad_difference(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn difference_vector_execution_modes_agree(
        refs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 8), 1..40),
        q in prop::collection::vec(-3.0f64..3.0, 8),
    ) {
        let mut store = TemplateStore::new(4, 2, 1).unwrap();
        for r in refs {
            store.push(Template::new(4, 2, r, 0).unwrap()).unwrap();
        }
        let q = Template::new(4, 2, q, 0).unwrap();
        let serial = difference_vector(&store, &q, Execution::Serial).unwrap();
        let parallel = difference_vector(&store, &q, Execution::Parallel).unwrap();
        prop_assert_eq!(serial, parallel);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn patch_normalization_ignores_positive_affine_changes(
        px in prop::collection::vec(0u8..=255, 16 * 8),
        gain in 0.05f64..20.0,
        offset in -200.0f64..200.0,
    ) {
        let values: Vec<f64> = px.iter().map(|&p| f64::from(p)).collect();
        let moved: Vec<f64> = values.iter().map(|v| gain * v + offset).collect();
        let a = patch_normalize_values(&values, 16, 8, 4).unwrap();
        let b = patch_normalize_values(&moved, 16, 8, 4).unwrap();
        prop_assert!(close(&a, &b, 1e-9));
    }

    #[test]
    fn neighborhood_normalization_ignores_positive_affine_changes(
        d in prop::collection::vec((0i32..100).prop_map(|v| f64::from(v) * 0.25), 2..80),
        gain in 0.05f64..20.0,
        offset in -200.0f64..200.0,
        half in 1usize..12,
    ) {
        let a = DifferenceVector { query_index: 0, scores: d.clone() };
        let b = DifferenceVector { query_index: 0, scores: d.iter().map(|v| gain * v + offset).collect() };
        let na = neighborhood_normalize(&a, half).unwrap();
        let nb = neighborhood_normalize(&b, half).unwrap();
        prop_assert!(close(&na.scores, &nb.scores, 1e-8));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_agrees_with_exhaustive_oracle((m, v_av) in matrix_strategy()) {
        let cfg = SlopeConfig { v_av, ..Default::default() };
        let slopes = cfg.slopes();
        let got = best_match(&m, &cfg, 0.0, Execution::Serial).unwrap();
        let par = best_match(&m, &cfg, 0.0, Execution::Parallel).unwrap();
        prop_assert_eq!(got, par);
        match oracle(&m, &slopes, v_av) {
            Some((score, start, k)) => {
                prop_assert_eq!(got.score, score);
                prop_assert_eq!(got.reference_start_index, start);
                prop_assert_eq!(got.slope, slopes[k]);
                prop_assert_eq!(got.accepted, score < 0.0);
            }
            None => prop_assert!(got.score.is_infinite() && !got.accepted),
        }
    }

    #[test]
    fn adding_a_constant_keeps_the_argmin((m, v_av) in matrix_strategy(), c in (-40i32..40).prop_map(|k| f64::from(k) * 0.25)) {
        let cfg = SlopeConfig { v_av, ..Default::default() };
        let a = best_match(&m, &cfg, 0.0, Execution::Serial).unwrap();
        let b = best_match(&shifted(&m, |v| v + c, 0, 0.0), &cfg, 0.0, Execution::Serial).unwrap();
        if a.score.is_finite() {
            prop_assert_eq!(a.reference_start_index, b.reference_start_index);
            prop_assert_eq!(a.slope, b.slope);
            prop_assert!((b.score - a.score - c).abs() < 1e-9);
        }
    }

    #[test]
    fn prepending_rows_shifts_the_match((m, v_av) in matrix_strategy(), k in 1usize..6) {
        let cfg = SlopeConfig { v_av, ..Default::default() };
        let a = best_match(&m, &cfg, 0.0, Execution::Serial).unwrap();
        let b = best_match(&shifted(&m, |v| v, k, 100.0), &cfg, 0.0, Execution::Serial).unwrap();
        prop_assume!(a.score.is_finite());
        prop_assert_eq!(b.reference_start_index, a.reference_start_index + k);
        prop_assert_eq!(b.reference_center_index, a.reference_center_index + k);
        prop_assert_eq!(b.score, a.score);
    }
}

fn truth_line(len: usize) -> GroundTruth {
    GroundTruth::new(vec![(0.0, 0.0), (len as f64, len as f64)], 1.0, 1.0).unwrap()
}

fn matches_strategy() -> impl Strategy<Value = Vec<SequenceMatch>> {
    prop::collection::vec((-30i32..30, -3.0f64..3.0), 1..120).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (off, score))| SequenceMatch {
                query_center_index: i + 5,
                reference_center_index: (i as i32 + 40 + off) as usize,
                reference_start_index: 0,
                slope: 1.0,
                score,
                accepted: true,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn accepted_count_grows_with_the_threshold(matches in matches_strategy()) {
        // truth is offset by 40 so the planted offsets are the errors
        let gt = GroundTruth::new(vec![(0.0, 40.0), (500.0, 540.0)], 1.0, 1.0).unwrap();
        let sweep = sweep_threshold(&matches, matches.len() + 9, &gt, 10.0, None);
        for w in sweep.points.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1.accepted_count <= w[1].1.accepted_count);
            prop_assert!(w[0].1.correct_count <= w[1].1.correct_count);
        }
        prop_assert_eq!(sweep.points[0].1.accepted_count, 0);
        prop_assert_eq!(sweep.points.last().unwrap().1.accepted_count, matches.len());
    }

    #[test]
    fn zero_fp_recall_shrinks_with_the_tolerance(matches in matches_strategy(), lo in 0.0f64..15.0, extra in 0.0f64..15.0) {
        let gt = GroundTruth::new(vec![(0.0, 40.0), (500.0, 540.0)], 1.0, 1.0).unwrap();
        let tight = sweep_threshold(&matches, matches.len(), &gt, lo, None).best.1.recall;
        let loose = sweep_threshold(&matches, matches.len(), &gt, lo + extra, None).best.1.recall;
        prop_assert!(tight <= loose);
    }

    #[test]
    fn recall_never_exceeds_the_warm_up_ceiling(matches in matches_strategy(), warm in 0usize..60) {
        let total = matches.len() + warm;
        let r = score_matches(&matches, total, &truth_line(1000), 1000.0);
        prop_assert!(r.recall <= (total - warm) as f64 / total as f64 + 1e-12);
        prop_assert_eq!(r.warm_up_frames, warm);
    }

    #[test]
    fn interpolation_is_monotone(
        steps in prop::collection::vec((0.1f64..20.0, 0.1f64..20.0), 1..12),
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let mut anchors = vec![(0.0, 0.0)];
        for (dq, dr) in steps {
            let (q, r) = *anchors.last().unwrap();
            anchors.push((q + dq, r + dr));
        }
        let gt = GroundTruth::new(anchors, 1.0, 1.0).unwrap();
        let span = gt.last_query() - gt.first_query();
        let (x, y) = (a.min(b) * span, a.max(b) * span);
        prop_assert!(gt.interpolate(x).unwrap() <= gt.interpolate(y).unwrap());
    }

    #[test]
    fn downsampling_composes_within_a_gray_level(img in gray(32, 16), fx in 1usize..3, fy in 1usize..3) {
        // block edges of both stages line up only when the sizes divide evenly
        let (rx, ry) = (4 * fx, 4 * fy);
        let direct = downsample(&img, rx, ry).unwrap();
        let staged = downsample(&downsample(&img, 2 * rx, 2 * ry).unwrap(), rx, ry).unwrap();
        for (a, b) in direct.pixels().iter().zip(staged.pixels()) {
            prop_assert!((i16::from(*a) - i16::from(*b)).abs() <= 1);
        }
    }

    #[test]
    fn crops_compose(img in gray(20, 12), x0 in 0usize..8, y0 in 0usize..5, x1 in 0usize..4, y1 in 0usize..3) {
        let outer = CropRect::new(x0, y0, 10, 6);
        let inner = CropRect::new(x1, y1, 5, 3);
        let staged = crop(&crop(&img, outer).unwrap(), inner).unwrap();
        let direct = crop(&img, CropRect::new(x0 + x1, y0 + y1, 5, 3)).unwrap();
        prop_assert_eq!(staged, direct);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blur_stays_within_the_window_range(
        frames in prop::collection::vec(gray(6, 4), 1..12),
        w in 1usize..6,
    ) {
        prop_assume!(w <= frames.len());
        let spec = BlurSpec::from_window(w, 15.0).unwrap();
        let out = temporal_blur(&frames, &spec).unwrap();
        prop_assert_eq!(out.len(), frames.len() + 1 - w);
        for (j, b) in out.iter().enumerate() {
            for i in 0..b.pixels().len() {
                let window = frames[j..j + w].iter().map(|f| f.pixels()[i]);
                let (lo, hi) = window.clone().fold((255u8, 0u8), |(l, h), p| (l.min(p), h.max(p)));
                prop_assert!((lo..=hi).contains(&b.pixels()[i]));
            }
        }
    }

    #[test]
    fn blur_does_not_add_gradient_energy(
        frames in prop::collection::vec(gray(16, 12), 2..10),
        w in 2usize..6,
    ) {
        prop_assume!(w <= frames.len());
        let spec = BlurSpec::from_window(w, 15.0).unwrap();
        let out = temporal_blur(&frames, &spec).unwrap();
        for (j, b) in out.iter().enumerate() {
            let mean_in = frames[j..j + w].iter().map(gradient_energy).sum::<f64>() / w as f64;
            prop_assert!(gradient_energy(b) <= 1.01 * mean_in);
        }
    }

    #[test]
    fn blur_window_scales_with_exposure(ms in 200.0f64..4000.0, fps in 5.0f64..60.0, k in 2u32..5) {
        let one = BlurSpec::new(ms, fps).unwrap().window() as f64;
        let many = BlurSpec::new(ms * f64::from(k), fps).unwrap().window() as f64;
        prop_assert!((many - f64::from(k) * one).abs() <= f64::from(k) / 2.0 + 0.5);
    }
}
