//! Long-exposure simulation by moving-average temporal blur.

use crate::imaging::GrayImage;
use crate::{round_half_up, Error, Result};

/// A simulated exposure expressed as a trailing window of source frames.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlurSpec {
    pub simulated_exposure_ms: f64,
    pub source_fps: f64,
    window: usize,
}

impl BlurSpec {
    /// `window = round(exposure_ms * fps / 1000)`; must come out at least 1.
    pub fn new(simulated_exposure_ms: f64, source_fps: f64) -> Result<Self> {
        if !(simulated_exposure_ms.is_finite() && source_fps.is_finite())
            || simulated_exposure_ms <= 0.0
            || source_fps <= 0.0
        {
            return Err(Error::invalid(format!(
                "exposure {simulated_exposure_ms} ms at {source_fps} fps"
            )));
        }
        let window = round_half_up(simulated_exposure_ms * source_fps / 1000.0);
        if window < 1.0 {
            return Err(Error::invalid(format!(
                "{simulated_exposure_ms} ms is shorter than one frame at {source_fps} fps"
            )));
        }
        Ok(Self {
            simulated_exposure_ms,
            source_fps,
            window: window as usize,
        })
    }

    pub fn from_window(window: usize, source_fps: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("blur window must be at least 1"));
        }
        Self::new(window as f64 * 1000.0 / source_fps, source_fps)
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

/// How far, in source frames, the centroid of the trailing window sits
/// behind its newest frame.
pub fn expected_lag(spec: &BlurSpec) -> f64 {
    (spec.window - 1) as f64 / 2.0
}

/// Per-pixel mean over a trailing window of `spec.window()` frames.
///
/// Output frame `j` averages input frames `j..j + window` and so lines up
/// with input frame `j + window - 1`. Sums are exact integers; each mean is
/// rounded half-up once.
pub fn temporal_blur(frames: &[GrayImage], spec: &BlurSpec) -> Result<Vec<GrayImage>> {
    let w = spec.window;
    if w > frames.len() {
        return Err(Error::invalid(format!(
            "blur window {w} exceeds {} frames",
            frames.len()
        )));
    }
    let (width, height) = (frames[0].width(), frames[0].height());
    if let Some(bad) = frames
        .iter()
        .position(|f| f.width() != width || f.height() != height)
    {
        return Err(Error::invalid(format!(
            "frame {bad} is {}x{}, expected {width}x{height}",
            frames[bad].width(),
            frames[bad].height()
        )));
    }
    let mut sums = vec![0u32; width * height];
    for f in &frames[..w - 1] {
        add(&mut sums, f.pixels());
    }
    let denom = 2 * w as u32;
    let mut out = Vec::with_capacity(frames.len() + 1 - w);
    for j in 0..=frames.len() - w {
        add(&mut sums, frames[j + w - 1].pixels());
        let pixels = sums
            .iter()
            .map(|&s| ((2 * s + w as u32) / denom) as u8)
            .collect();
        out.push(GrayImage::new(width, height, pixels)?);
        for (s, &p) in sums.iter_mut().zip(frames[j].pixels()) {
            *s -= u32::from(p);
        }
    }
    Ok(out)
}

fn add(sums: &mut [u32], pixels: &[u8]) {
    for (s, &p) in sums.iter_mut().zip(pixels) {
        *s += u32::from(p);
    }
}
