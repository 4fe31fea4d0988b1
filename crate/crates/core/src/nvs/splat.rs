//! Z-buffered disc splatting of colored points.

use image::Rgb;

use crate::geometry::{project, Intrinsics, Vec3};
use crate::imaging::{Mask, RgbImage};

/// Splat radius in normalized device coordinates.
pub const DEFAULT_RADIUS_NDC: f64 = 0.007;
/// Points retained per pixel.
pub const DEFAULT_POINTS_PER_PIXEL: usize = 8;

/// Per-pixel list of the `k` nearest points, sorted front to back.
#[derive(Debug, Clone)]
pub struct ZBuffer {
    width: u32,
    k: usize,
    depth: Vec<f64>,
    index: Vec<u32>,
    len: Vec<u8>,
}

impl ZBuffer {
    fn new(width: u32, height: u32, k: usize) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            k,
            depth: vec![f64::INFINITY; n * k],
            index: vec![u32::MAX; n * k],
            len: vec![0; n],
        }
    }

    fn insert(&mut self, pixel: usize, depth: f64, point: u32) {
        let base = pixel * self.k;
        let len = self.len[pixel] as usize;
        if len == self.k && depth >= self.depth[base + len - 1] {
            return;
        }
        let mut pos = len.min(self.k - 1);
        while pos > 0 && self.depth[base + pos - 1] > depth {
            if pos < self.k {
                self.depth[base + pos] = self.depth[base + pos - 1];
                self.index[base + pos] = self.index[base + pos - 1];
            }
            pos -= 1;
        }
        self.depth[base + pos] = depth;
        self.index[base + pos] = point;
        if len < self.k {
            self.len[pixel] += 1;
        }
    }

    /// Depths of the points covering pixel `(x, y)`, nearest first.
    pub fn depths(&self, x: u32, y: u32) -> &[f64] {
        let p = y as usize * self.width as usize + x as usize;
        &self.depth[p * self.k..p * self.k + self.len[p] as usize]
    }

    /// Indices (into the splatted point list) covering `(x, y)`, nearest first.
    pub fn points(&self, x: u32, y: u32) -> &[u32] {
        let p = y as usize * self.width as usize + x as usize;
        &self.index[p * self.k..p * self.k + self.len[p] as usize]
    }

    pub fn nearest(&self, x: u32, y: u32) -> Option<(f64, u32)> {
        let p = y as usize * self.width as usize + x as usize;
        (self.len[p] > 0).then(|| (self.depth[p * self.k], self.index[p * self.k]))
    }
}

#[derive(Debug, Clone)]
pub struct SplatOutput {
    pub rgb: RgbImage,
    pub valid: Mask,
    pub zbuffer: ZBuffer,
}

/// Splats camera-frame points as discs of radius `radius_ndc` (NDC spans
/// [−1, 1] across the shorter image side). Each pixel takes the color of
/// the nearest covering point; uncovered pixels are black and invalid.
pub fn splat_points(
    points: &[(Vec3, [u8; 3])],
    intr: &Intrinsics,
    radius_ndc: f64,
    k: usize,
) -> SplatOutput {
    assert!(radius_ndc > 0.0 && k >= 1, "radius_ndc > 0 and k ≥ 1 required");
    let (w, h) = (intr.width, intr.height);
    let radius_px = radius_ndc * intr.width.min(intr.height) as f64 / 2.0;
    let r2 = radius_px * radius_px;
    let mut zbuf = ZBuffer::new(w, h, k);
    for (i, (p, _)) in points.iter().enumerate() {
        let Ok(px) = project(p, intr) else { continue };
        let depth = -p.z;
        let x0 = (px.u - radius_px).ceil().max(0.0);
        let x1 = (px.u + radius_px).floor().min(w as f64 - 1.0);
        let y0 = (px.v - radius_px).ceil().max(0.0);
        let y1 = (px.v + radius_px).floor().min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as u32..=y1 as u32 {
            let dy = y as f64 - px.v;
            for x in x0 as u32..=x1 as u32 {
                let dx = x as f64 - px.u;
                if dx * dx + dy * dy <= r2 {
                    zbuf.insert(y as usize * w as usize + x as usize, depth, i as u32);
                }
            }
        }
    }
    let mut rgb = RgbImage::new(w, h);
    let mut valid = Mask::new(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if let Some((_, idx)) = zbuf.nearest(x, y) {
                rgb.put_pixel(x, y, Rgb(points[idx as usize].1));
                valid.set(x, y, true);
            }
        }
    }
    SplatOutput {
        rgb,
        valid,
        zbuffer: zbuf,
    }
}
