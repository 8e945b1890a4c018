//! Frame directories: 8-bit PNG or PGM/PPM files named by a numeric stem.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};

use crate::imaging::{GrayImage, RawImage};
use crate::{Error, Result};

const EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pnm"];

/// Image files of `dir` sorted by numeric stem. Files with other
/// extensions are ignored; an image whose stem is not a number is an error.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !is_image || !path.is_file() {
            continue;
        }
        let number = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| {
                Error::invalid(format!("{} does not have a numeric name", path.display()))
            })?;
        frames.push((number, path));
    }
    frames.sort();
    if let Some(w) = frames.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::invalid(format!(
            "{} and {} share frame number {}",
            w[0].1.display(),
            w[1].1.display(),
            w[0].0
        )));
    }
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => RawImage::new(w, h, 1, b.into_raw()),
        DynamicImage::ImageLumaA8(_) => RawImage::new(w, h, 1, img.to_luma8().into_raw()),
        DynamicImage::ImageRgb8(b) => RawImage::new(w, h, 3, b.into_raw()),
        DynamicImage::ImageRgba8(_) => RawImage::new(w, h, 3, img.to_rgb8().into_raw()),
        other => Err(Error::invalid(format!(
            "{}: only 8-bit gray or RGB images are supported, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Reads every frame of `dir` in order.
pub fn read_frames(dir: impl AsRef<Path>) -> Result<Vec<RawImage>> {
    list_frames(dir)?.iter().map(read_image).collect()
}

pub fn write_gray_png(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    let path = path.as_ref();
    let buf = image::GrayImage::from_raw(
        img.width() as u32,
        img.height() as u32,
        img.pixels().to_vec(),
    )
    .ok_or_else(|| Error::invalid("image buffer size mismatch"))?;
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_owned(),
            source,
        })
}

/// Zero-padded frame file name, e.g. `000123.png`.
pub fn frame_name(number: usize) -> String {
    format!("{number:06}.png")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(2, 1, vec![3, 200]).unwrap();
        for n in [10, 2, 1] {
            write_gray_png(dir.path().join(frame_name(n)), &img).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let names: Vec<String> = list_frames(dir.path())
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["000001.png", "000002.png", "000010.png"]);
        let frames = read_frames(dir.path()).unwrap();
        assert_eq!(frames[0].pixels(), &[3, 200]);
        assert_eq!(frames[0].channels(), 1);
    }

    #[test]
    fn reads_pnm() {
        let dir = tempfile::tempdir().unwrap();
        let mut ppm = b"P6\n2 1\n255\n".to_vec();
        ppm.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        std::fs::write(dir.path().join("7.ppm"), ppm).unwrap();
        let mut pgm = b"P5\n1 1\n255\n".to_vec();
        pgm.push(42);
        std::fs::write(dir.path().join("8.pgm"), pgm).unwrap();
        let frames = read_frames(dir.path()).unwrap();
        assert_eq!(frames[0].channels(), 3);
        assert_eq!(frames[0].pixels(), &[255, 0, 0, 0, 0, 255]);
        assert_eq!(frames[1].pixels(), &[42]);
    }

    #[test]
    fn rejects_non_numeric_names() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::new(1, 1, vec![0]).unwrap();
        write_gray_png(dir.path().join("frame_a.png"), &img).unwrap();
        assert!(list_frames(dir.path()).is_err());
        assert!(list_frames(dir.path().join("missing")).is_err());
    }
}
