//! Procedural routes with exactly known frame correspondences.
//!
//! A route is a long textured panorama. A traverse samples camera-width
//! windows of it at increasing positions, so the true reference frame of
//! every query frame follows from the two position lists. Night traverses
//! apply slowly varying per-region gain and offset plus sensor noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::eval::GroundTruth;
use crate::imaging::GrayImage;
use crate::Result;

// Texture amplitudes, in gray levels.
const VERTICAL: f64 = 50.0;
const SWELL: f64 = 80.0;
const TEXTURE: f64 = 55.0;
/// Largest fraction of the frame height covered by saturated sky.
const SKY_MAX: f64 = 0.5;

/// Grayscale texture indexed by route position (columns) and row.
#[derive(Clone, Debug)]
pub struct Panorama {
    length: usize,
    height: usize,
    data: Vec<f32>,
}

struct Lattice {
    cell: f64,
    cols: usize,
    values: Vec<f32>,
}

impl Lattice {
    fn new(rng: &mut ChaCha8Rng, cell: f64, length: usize, height: usize) -> Self {
        let cols = (length as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let values = (0..cols * rows)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        Self { cell, cols, values }
    }

    fn sample(&self, u: f64, y: f64) -> f64 {
        let (gu, gy) = (u / self.cell, y / self.cell);
        let (iu, iy) = (gu.floor() as usize, gy.floor() as usize);
        let (fu, fy) = (smooth(gu.fract()), smooth(gy.fract()));
        let v = |c: usize, r: usize| f64::from(self.values[r * self.cols + c]);
        let top = v(iu, iy) * (1.0 - fu) + v(iu + 1, iy) * fu;
        let bottom = v(iu, iy + 1) * (1.0 - fu) + v(iu + 1, iy + 1) * fu;
        top * (1.0 - fy) + bottom * fy
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl Panorama {
    /// Multi-octave value noise over a vertical sky-to-ground gradient and
    /// a slow along-route brightness swell.
    pub fn generate(length: usize, height: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let octaves: Vec<(Lattice, f64)> = [(64.0, 1.0), (24.0, 0.8), (10.0, 0.6), (4.0, 0.35)]
            .into_iter()
            .map(|(cell, amp)| (Lattice::new(&mut rng, cell, length, height), amp))
            .collect();
        let swell = Lattice::new(&mut rng, 400.0, length, 1);
        let skyline = Lattice::new(&mut rng, 300.0, length, 1);
        let treeline = Lattice::new(&mut rng, 12.0, length, 1);
        let mut data = Vec::with_capacity(length * height);
        for y in 0..height {
            let vertical = VERTICAL * (1.0 - 2.0 * y as f64 / height as f64);
            for u in 0..length {
                let sky = SKY_MAX * (0.5 + 0.5 * skyline.sample(u as f64, 0.0))
                    + 0.08 * treeline.sample(u as f64, 0.0);
                if (y as f64) < sky * height as f64 {
                    data.push(255.0);
                    continue;
                }
                let texture: f64 = octaves
                    .iter()
                    .map(|(l, amp)| amp * l.sample(u as f64, y as f64))
                    .sum();
                let v = 128.0 + vertical + SWELL * swell.sample(u as f64, 0.0) + TEXTURE * texture;
                data.push(v.clamp(0.0, 255.0) as f32);
            }
        }
        Self {
            length,
            height,
            data,
        }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Camera view of `width` columns starting at route `position`,
    /// linearly interpolated between panorama columns.
    pub fn render(&self, position: f64, width: usize) -> Result<GrayImage> {
        assert!(
            position >= 0.0 && position + width as f64 + 1.0 <= self.length as f64,
            "view at {position} leaves the panorama"
        );
        let base = position.floor() as usize;
        let frac = position - base as f64;
        let mut px = Vec::with_capacity(width * self.height);
        for y in 0..self.height {
            let row = &self.data[y * self.length..(y + 1) * self.length];
            for x in 0..width {
                let a = f64::from(row[base + x]);
                let b = f64::from(row[base + x + 1]);
                px.push((a + (b - a) * frac + 0.5).floor().clamp(0.0, 255.0) as u8);
            }
        }
        GrayImage::new(width, self.height, px)
    }
}

/// Camera positions along a route plus the frames seen there.
#[derive(Clone, Debug)]
pub struct Traverse {
    pub positions: Vec<f64>,
    pub frames: Vec<GrayImage>,
}

impl Traverse {
    pub fn render(pano: &Panorama, positions: Vec<f64>, width: usize) -> Result<Self> {
        let frames = positions
            .iter()
            .map(|&p| pano.render(p, width))
            .collect::<Result<_>>()?;
        Ok(Self { positions, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// `count` positions `start, start + step, ...`.
pub fn constant_speed(start: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start + step * k as f64).collect()
}

/// Positions from `start` up to `end` whose per-frame advance is `step`
/// times a speed ratio that wanders inside `[lo, hi]`.
pub fn jittered_speed(start: f64, end: f64, step: f64, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = 0.5 * (lo + hi);
    let mut ratio = mid;
    let mut pos = start;
    let mut out = Vec::new();
    while pos <= end {
        out.push(pos);
        // mean-reverting walk with a small per-frame kick
        ratio += 0.1 * (mid - ratio) + rng.random_range(-0.04..0.04);
        ratio = ratio.clamp(lo, hi);
        pos += step * ratio;
    }
    out
}

/// Ground truth for a query traverse against a constant-speed reference
/// traverse, with an anchor every `every` query frames and at the last.
pub fn ground_truth(
    query_positions: &[f64],
    reference_start: f64,
    reference_step: f64,
    every: usize,
    query_spacing: f64,
    reference_spacing: f64,
) -> Result<GroundTruth> {
    let last = query_positions.len() - 1;
    let anchors = (0..=last)
        .filter(|&t| t % every == 0 || t == last)
        .map(|t| {
            (
                t as f64,
                (query_positions[t] - reference_start) / reference_step,
            )
        })
        .collect();
    GroundTruth::new(anchors, query_spacing, reference_spacing)
}

/// Illumination change between traverses: per-region gain and offset that
/// drift along the route, then additive Gaussian noise.
#[derive(Clone, Debug)]
pub struct NightShift {
    pub regions_x: usize,
    pub regions_y: usize,
    pub gain: (f64, f64),
    pub offset: (f64, f64),
    /// Route distance over which region parameters are redrawn.
    pub drift_period: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for NightShift {
    fn default() -> Self {
        Self {
            regions_x: 3,
            regions_y: 2,
            gain: (0.08, 0.35),
            offset: (0.0, 60.0),
            drift_period: 60.0,
            noise_sigma: 25.0,
            seed: 7,
        }
    }
}

impl NightShift {
    /// Applies the shift to `traverse`, whose frames all share one size.
    pub fn apply(&self, traverse: &Traverse) -> Result<Traverse> {
        let regions = self.regions_x * self.regions_y;
        let max_pos = traverse.positions.iter().cloned().fold(0.0, f64::max);
        let knots = (max_pos / self.drift_period).ceil() as usize + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let params: Vec<(f64, f64)> = (0..knots * regions)
            .map(|_| {
                (
                    rng.random_range(self.gain.0..=self.gain.1),
                    rng.random_range(self.offset.0..=self.offset.1),
                )
            })
            .collect();
        let noise =
            Normal::new(0.0, self.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
        let mut frames = Vec::with_capacity(traverse.len());
        for (frame, &pos) in traverse.frames.iter().zip(&traverse.positions) {
            let (w, h) = (frame.width(), frame.height());
            let k = pos / self.drift_period;
            let (k0, t) = (k.floor() as usize, k.fract());
            let mut px = Vec::with_capacity(w * h);
            for y in 0..h {
                let ry = (y * self.regions_y / h).min(self.regions_y - 1);
                for x in 0..w {
                    let rx = (x * self.regions_x / w).min(self.regions_x - 1);
                    let r = ry * self.regions_x + rx;
                    let (g0, o0) = params[k0 * regions + r];
                    let (g1, o1) = params[(k0 + 1) * regions + r];
                    let gain = g0 + (g1 - g0) * t;
                    let offset = o0 + (o1 - o0) * t;
                    let n = if self.noise_sigma > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    let v = gain * f64::from(frame.get(x, y)) + offset + n;
                    px.push((v + 0.5).floor().clamp(0.0, 255.0) as u8);
                }
            }
            frames.push(GrayImage::new(w, h, px)?);
        }
        Ok(Traverse {
            positions: traverse.positions.clone(),
            frames,
        })
    }
}

/// A day reference traverse, a night query traverse of the same route, and
/// their ground truth.
#[derive(Clone, Debug)]
pub struct DayNightPair {
    pub reference: Traverse,
    pub query: Traverse,
    pub truth: GroundTruth,
    /// Reference frames per query frame at equal speed.
    pub v_av: f64,
}

/// Geometry and randomness of the day/night harness.
#[derive(Clone, Debug)]
pub struct DayNightConfig {
    pub reference_frames: usize,
    pub frame_width: usize,
    pub frame_height: usize,
    /// Route distance between reference frames, panorama columns.
    pub step: f64,
    pub speed_range: (f64, f64),
    pub night: NightShift,
    pub anchor_every: usize,
    pub meters_per_column: f64,
    pub seed: u64,
}

impl Default for DayNightConfig {
    fn default() -> Self {
        Self {
            reference_frames: 600,
            frame_width: 128,
            frame_height: 96,
            step: 32.0,
            speed_range: (0.84, 1.19),
            night: NightShift::default(),
            anchor_every: 10,
            meters_per_column: 1.0,
            seed: 2013,
        }
    }
}

pub fn day_night_pair(cfg: &DayNightConfig) -> Result<DayNightPair> {
    let route_len = cfg.step * (cfg.reference_frames - 1) as f64;
    let pano = Panorama::generate(
        route_len.ceil() as usize + cfg.frame_width + 4,
        cfg.frame_height,
        cfg.seed,
    );
    let reference = Traverse::render(
        &pano,
        constant_speed(0.0, cfg.step, cfg.reference_frames),
        cfg.frame_width,
    )?;
    let (lo, hi) = cfg.speed_range;
    let positions = jittered_speed(0.0, route_len, cfg.step, lo, hi, cfg.seed ^ 0x5eed);
    let day_query = Traverse::render(&pano, positions, cfg.frame_width)?;
    let query = cfg.night.apply(&day_query)?;
    let spacing = cfg.step * cfg.meters_per_column;
    let truth = ground_truth(
        &query.positions,
        0.0,
        cfg.step,
        cfg.anchor_every,
        spacing,
        spacing,
    )?;
    let v_av = reference.len() as f64 / query.len() as f64;
    Ok(DayNightPair {
        reference,
        query,
        truth,
        v_av,
    })
}

/// Sharp reference traverse plus a `rate`-times denser query traverse of the
/// same route, for blur experiments. The query has mild noise but no
/// illumination change.
#[derive(Clone, Debug)]
pub struct BlurRoute {
    pub reference: Traverse,
    pub query: Traverse,
    pub truth: GroundTruth,
    pub v_av: f64,
}

pub fn blur_route(reference_frames: usize, step: f64, rate: usize, seed: u64) -> Result<BlurRoute> {
    let cfg = DayNightConfig {
        reference_frames,
        step,
        seed,
        ..Default::default()
    };
    let route_len = cfg.step * (reference_frames - 1) as f64;
    let pano = Panorama::generate(
        route_len.ceil() as usize + cfg.frame_width + 4,
        cfg.frame_height,
        seed,
    );
    let reference = Traverse::render(
        &pano,
        constant_speed(0.0, cfg.step, reference_frames),
        cfg.frame_width,
    )?;
    let query_step = cfg.step / rate as f64;
    let positions = jittered_speed(0.0, route_len, query_step, 0.9, 1.1, seed ^ 0xb10b);
    let sharp = Traverse::render(&pano, positions, cfg.frame_width)?;
    let query = NightShift {
        gain: (1.0, 1.0),
        offset: (0.0, 0.0),
        noise_sigma: 2.0,
        seed: seed ^ 0x0153,
        ..Default::default()
    }
    .apply(&sharp)?;
    let truth = ground_truth(&query.positions, 0.0, cfg.step, 10, query_step, cfg.step)?;
    Ok(BlurRoute {
        reference,
        v_av: 1.0 / rate as f64,
        query,
        truth,
    })
}
