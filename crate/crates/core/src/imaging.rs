//! Image containers and PNG I/O shared by the pipeline.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::ImageEncoder;

use crate::error::{Result, VistaError};

pub use image::{Rgb, RgbImage};

/// Per-pixel planar depth in meters. `f64::INFINITY` marks pixels with no surface.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, fill: f64) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(VistaError::InvalidParameter {
                name: "depth",
                reason: format!("{} values for a {width}×{height} map", data.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, d: f64) {
        self.data[y as usize * self.width as usize + x as usize] = d;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Mean over finite entries, or `None` when every pixel is empty.
    pub fn mean_finite(&self) -> Option<f64> {
        let (sum, n) = self
            .data
            .iter()
            .filter(|d| d.is_finite())
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Boolean per-pixel mask, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, fill: bool) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width as usize * height as usize],
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    /// White where set, black elsewhere.
    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_fn(self.width, self.height, |x, y| {
            if self.get(x, y) {
                Rgb([255, 255, 255])
            } else {
                Rgb([0, 0, 0])
            }
        })
    }
}

pub fn save_png(path: &Path, img: &RgbImage) -> Result<()> {
    let file = File::create(path).map_err(|e| VistaError::io(path, e))?;
    let encoder = PngEncoder::new_with_quality(
        BufWriter::new(file),
        CompressionType::Fast,
        FilterType::Sub,
    );
    encoder
        .write_image(
            img.as_raw(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| VistaError::Image {
            path: path.to_path_buf(),
            source,
        })
}

pub fn load_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => VistaError::io(path, e),
        source => VistaError::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    Ok(img.to_rgb8())
}

/// Largest per-channel absolute difference between two same-sized images.
pub fn max_channel_diff(a: &RgbImage, b: &RgbImage) -> u8 {
    a.as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(x, y)| x.abs_diff(*y))
        .max()
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_preserves_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = RgbImage::from_fn(17, 9, |x, y| Rgb([x as u8 * 13, y as u8 * 29, (x ^ y) as u8]));
        save_png(&path, &img).unwrap();
        assert_eq!(load_png(&path).unwrap(), img);
    }

    #[test]
    fn missing_png_reports_path() {
        let err = load_png(Path::new("/nonexistent/frame.png")).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/frame.png"));
    }

    #[test]
    fn depth_mean_ignores_empty_pixels() {
        let mut d = DepthMap::new(2, 2, f64::INFINITY);
        assert_eq!(d.mean_finite(), None);
        d.set(0, 0, 1.0);
        d.set(1, 1, 3.0);
        assert_eq!(d.mean_finite(), Some(2.0));
    }
}
