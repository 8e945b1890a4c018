//! Image preprocessing: grayscale conversion, cropping, area downsampling
//! and patch normalization.

use crate::{Error, Result};

/// An 8-bit image with one (gray) or three (RGB, interleaved) channels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "buffer holds {} values, expected {width}x{height}x{channels}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// A single-channel 8-bit image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "buffer holds {} values, expected {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

impl From<GrayImage> for RawImage {
    fn from(img: GrayImage) -> Self {
        RawImage {
            width: img.width,
            height: img.height,
            channels: 1,
            pixels: img.pixels,
        }
    }
}

/// A resolution-reduced image of real-valued intensities, the unit of
/// comparison. Produced either by [`patch_normalize`] or, for the
/// unnormalized baseline, by [`Template::from_gray`].
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    rx: usize,
    ry: usize,
    values: Vec<f64>,
    source_index: usize,
}

impl Template {
    pub fn new(rx: usize, ry: usize, values: Vec<f64>, source_index: usize) -> Result<Self> {
        if rx == 0 || ry == 0 || values.len() != rx * ry {
            return Err(Error::invalid(format!(
                "template of {} values cannot be {rx}x{ry}",
                values.len()
            )));
        }
        Ok(Self {
            rx,
            ry,
            values,
            source_index,
        })
    }

    /// Raw intensities without any normalization.
    pub fn from_gray(img: &GrayImage, source_index: usize) -> Self {
        Self {
            rx: img.width,
            ry: img.height,
            values: img.pixels.iter().map(|&p| f64::from(p)).collect(),
            source_index,
        }
    }

    pub fn rx(&self) -> usize {
        self.rx
    }

    pub fn ry(&self) -> usize {
        self.ry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source_index(&self) -> usize {
        self.source_index
    }

    pub fn with_source_index(mut self, index: usize) -> Self {
        self.source_index = index;
        self
    }
}

/// Axis-aligned crop rectangle, top-left inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CropRect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl CropRect {
    pub fn new(x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Self {
            x0,
            y0,
            width,
            height,
        }
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.width > 0
            && self.height > 0
            && self.x0.checked_add(self.width).is_some_and(|r| r <= width)
            && self
                .y0
                .checked_add(self.height)
                .is_some_and(|b| b <= height)
    }
}

/// Luma with the weights 0.2989, 0.5870, 0.1140, rounded half-up.
///
/// Evaluated in integer ten-thousandths so that ties round exactly.
pub fn to_grayscale(img: &RawImage) -> Result<GrayImage> {
    match img.channels {
        1 => Ok(GrayImage {
            width: img.width,
            height: img.height,
            pixels: img.pixels.clone(),
        }),
        3 => {
            let pixels = img
                .pixels
                .chunks_exact(3)
                .map(|rgb| {
                    let weighted = 2989 * u32::from(rgb[0])
                        + 5870 * u32::from(rgb[1])
                        + 1140 * u32::from(rgb[2]);
                    ((weighted + 5000) / 10_000).min(255) as u8
                })
                .collect();
            Ok(GrayImage {
                width: img.width,
                height: img.height,
                pixels,
            })
        }
        c => Err(Error::invalid(format!("unsupported channel count {c}"))),
    }
}

pub fn crop(img: &GrayImage, rect: CropRect) -> Result<GrayImage> {
    if !rect.fits(img.width, img.height) {
        return Err(Error::invalid(format!(
            "crop {rect:?} exceeds {}x{} image",
            img.width, img.height
        )));
    }
    let mut pixels = Vec::with_capacity(rect.width * rect.height);
    for y in rect.y0..rect.y0 + rect.height {
        let row = y * img.width;
        pixels.extend_from_slice(&img.pixels[row + rect.x0..row + rect.x0 + rect.width]);
    }
    Ok(GrayImage {
        width: rect.width,
        height: rect.height,
        pixels,
    })
}

/// Area-averaging downsample to `rx` x `ry`.
///
/// Output pixel `(x, y)` is the mean over source columns
/// `[x*W/rx, (x+1)*W/rx)` and rows `[y*H/ry, (y+1)*H/ry)`, rounded half-up.
pub fn downsample(img: &GrayImage, rx: usize, ry: usize) -> Result<GrayImage> {
    if rx == 0 || ry == 0 || rx > img.width || ry > img.height {
        return Err(Error::invalid(format!(
            "cannot resample {}x{} to {rx}x{ry}",
            img.width, img.height
        )));
    }
    if rx == img.width && ry == img.height {
        return Ok(img.clone());
    }
    let col_edges: Vec<usize> = (0..=rx).map(|x| x * img.width / rx).collect();
    let row_edges: Vec<usize> = (0..=ry).map(|y| y * img.height / ry).collect();
    let mut pixels = Vec::with_capacity(rx * ry);
    for y in 0..ry {
        for x in 0..rx {
            let mut sum = 0u64;
            for sy in row_edges[y]..row_edges[y + 1] {
                let row = &img.pixels[sy * img.width..(sy + 1) * img.width];
                sum += row[col_edges[x]..col_edges[x + 1]]
                    .iter()
                    .map(|&p| u64::from(p))
                    .sum::<u64>();
            }
            let count =
                ((row_edges[y + 1] - row_edges[y]) * (col_edges[x + 1] - col_edges[x])) as u64;
            // floor(sum/count + 1/2) in integers
            pixels.push(((2 * sum + count) / (2 * count)) as u8);
        }
    }
    Ok(GrayImage {
        width: rx,
        height: ry,
        pixels,
    })
}

/// Standardizes every non-overlapping `n_p` x `n_p` patch of `img` to zero
/// mean and unit population standard deviation.
pub fn patch_normalize(img: &GrayImage, n_p: usize, source_index: usize) -> Result<Template> {
    let values: Vec<f64> = img.pixels.iter().map(|&p| f64::from(p)).collect();
    let values = patch_normalize_values(&values, img.width, img.height, n_p)?;
    Ok(Template {
        rx: img.width,
        ry: img.height,
        values,
        source_index,
    })
}

/// [`patch_normalize`] over an arbitrary real-valued row-major buffer.
///
/// A patch whose values are all equal maps to zeros.
pub fn patch_normalize_values(
    values: &[f64],
    width: usize,
    height: usize,
    n_p: usize,
) -> Result<Vec<f64>> {
    if n_p == 0 || !width.is_multiple_of(n_p) || !height.is_multiple_of(n_p) {
        return Err(Error::invalid(format!(
            "{width}x{height} is not divisible into {n_p}x{n_p} patches"
        )));
    }
    if values.len() != width * height {
        return Err(Error::invalid("buffer does not match dimensions"));
    }
    let mut out = vec![0.0; values.len()];
    let count = (n_p * n_p) as f64;
    let mut patch = Vec::with_capacity(n_p * n_p);
    for py in (0..height).step_by(n_p) {
        for px in (0..width).step_by(n_p) {
            patch.clear();
            for y in py..py + n_p {
                patch.extend_from_slice(&values[y * width + px..y * width + px + n_p]);
            }
            let first = patch[0];
            if patch.iter().all(|&v| v == first) {
                continue;
            }
            let mean = patch.iter().sum::<f64>() / count;
            let var = patch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
            let std = var.sqrt();
            for y in py..py + n_p {
                for x in px..px + n_p {
                    out[y * width + x] = (values[y * width + x] - mean) / std;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(r: u8, g: u8, b: u8) -> u8 {
        let img = RawImage::new(1, 1, 3, vec![r, g, b]).unwrap();
        to_grayscale(&img).unwrap().pixels[0]
    }

    #[test]
    fn grayscale_examples() {
        assert_eq!(rgb(0, 0, 0), 0);
        assert_eq!(rgb(255, 255, 255), 255);
        assert_eq!(rgb(100, 0, 0), 30);
        // 0.5870 * 200 = 117.4
        assert_eq!(rgb(0, 200, 0), 117);
        // 0.1140 * 250 = 28.5, a tie rounds up
        assert_eq!(rgb(0, 0, 250), 29);
    }

    #[test]
    fn grayscale_rejects_two_channels() {
        let img = RawImage::new(1, 1, 2, vec![1, 2]).unwrap();
        assert!(matches!(to_grayscale(&img), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn grayscale_passes_gray_through() {
        let img = RawImage::new(2, 1, 1, vec![7, 250]).unwrap();
        let g = to_grayscale(&img).unwrap();
        assert_eq!(g.pixels(), &[7, 250]);
        assert_eq!(to_grayscale(&g.clone().into()).unwrap(), g);
    }

    #[test]
    fn raw_image_checks_buffer_length() {
        assert!(RawImage::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
    }

    fn ramp(w: usize, h: usize) -> GrayImage {
        GrayImage::new(w, h, (0..w * h).map(|i| i as u8).collect()).unwrap()
    }

    #[test]
    fn crop_examples() {
        let img = ramp(4, 4);
        assert_eq!(crop(&img, CropRect::new(0, 0, 4, 4)).unwrap(), img);
        let c = crop(&img, CropRect::new(1, 1, 2, 2)).unwrap();
        assert_eq!(c.pixels(), &[5, 6, 9, 10]);
        assert!(crop(&img, CropRect::new(3, 3, 2, 2)).is_err());
        assert!(crop(&img, CropRect::new(0, 0, 0, 2)).is_err());
    }

    #[test]
    fn crop_composes() {
        let img = ramp(10, 8);
        let a = CropRect::new(2, 1, 6, 5);
        let b = CropRect::new(1, 2, 3, 2);
        let twice = crop(&crop(&img, a).unwrap(), b).unwrap();
        let once = crop(&img, CropRect::new(3, 3, 3, 2)).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn downsample_examples() {
        let constant = GrayImage::filled(64, 48, 77).unwrap();
        for (rx, ry) in [(64, 48), (32, 24), (7, 5), (1, 1)] {
            let d = downsample(&constant, rx, ry).unwrap();
            assert!(d.pixels().iter().all(|&p| p == 77));
        }
        let img = GrayImage::new(2, 2, vec![0, 255, 0, 255]).unwrap();
        assert_eq!(downsample(&img, 1, 1).unwrap().pixels(), &[128]);
        let r = ramp(6, 4);
        assert_eq!(downsample(&r, 6, 4).unwrap(), r);
        assert!(downsample(&r, 7, 4).is_err());
    }

    #[test]
    fn downsample_uneven_blocks() {
        // 3 columns into 2: blocks [0,1) and [1,3)
        let img = GrayImage::new(3, 1, vec![10, 20, 31]).unwrap();
        assert_eq!(downsample(&img, 2, 1).unwrap().pixels(), &[10, 26]);
    }

    #[test]
    fn patch_normalize_examples() {
        let flat = GrayImage::filled(8, 8, 200).unwrap();
        let t = patch_normalize(&flat, 8, 0).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));

        let half: Vec<u8> = (0..64).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect();
        let img = GrayImage::new(8, 8, half).unwrap();
        let t = patch_normalize(&img, 8, 0).unwrap();
        for (i, &v) in t.values().iter().enumerate() {
            let want = if i % 2 == 0 { -1.0 } else { 1.0 };
            assert!((v - want).abs() < 1e-12, "{i}: {v}");
        }
    }

    #[test]
    fn patch_normalize_hand_oracle() {
        // 2x2 patch [1, 2, 3, 6]: mean 3, population variance (4+1+0+9)/4 = 3.5
        let img = GrayImage::new(2, 2, vec![1, 2, 3, 6]).unwrap();
        let t = patch_normalize(&img, 2, 0).unwrap();
        let s = 3.5f64.sqrt();
        let want = [-2.0 / s, -1.0 / s, 0.0, 3.0 / s];
        for (v, w) in t.values().iter().zip(want) {
            assert!((v - w).abs() <= 1e-9 * w.abs().max(1.0));
        }
    }

    #[test]
    fn patch_normalize_requires_divisible_dims() {
        let img = GrayImage::filled(12, 8, 1).unwrap();
        assert!(patch_normalize(&img, 8, 0).is_err());
        assert!(patch_normalize(&img, 0, 0).is_err());
        assert!(patch_normalize(&img, 4, 0).is_ok());
    }

    #[test]
    fn patches_are_independent() {
        let mut px = vec![0u8; 16 * 8];
        for y in 0..8 {
            for x in 0..16 {
                px[y * 16 + x] = if x < 8 {
                    9
                } else {
                    ((x * 7 + y * 3) % 50) as u8
                };
            }
        }
        let t = patch_normalize(&GrayImage::new(16, 8, px).unwrap(), 8, 3).unwrap();
        assert_eq!(t.source_index(), 3);
        for y in 0..8 {
            assert!(t.values()[y * 16..y * 16 + 8].iter().all(|&v| v == 0.0));
        }
        let right: Vec<f64> = (0..8)
            .flat_map(|y| t.values()[y * 16 + 8..y * 16 + 16].to_vec())
            .collect();
        let mean = right.iter().sum::<f64>() / 64.0;
        let var = right.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-6);
    }
}
