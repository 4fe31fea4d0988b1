//! Pull-push hole filling over a dyadic pyramid of valid-pixel averages.

use image::Rgb;

use crate::imaging::{Mask, RgbImage};

/// Fill value used when no pixel is valid.
pub const NEUTRAL_GREY: u8 = 128;

struct Level {
    width: usize,
    height: usize,
    /// Mean color of the valid level-0 pixels under each cell.
    color: Vec<[f64; 3]>,
    count: Vec<u32>,
}

impl Level {
    fn at(&self, x: usize, y: usize) -> ([f64; 3], u32) {
        let i = y * self.width + x;
        (self.color[i], self.count[i])
    }
}

fn pull(rgb: &RgbImage, valid: &Mask) -> Vec<Level> {
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut base = Level {
        width: w,
        height: h,
        color: vec![[0.0; 3]; w * h],
        count: vec![0; w * h],
    };
    for y in 0..h {
        for x in 0..w {
            if valid.get(x as u32, y as u32) {
                let p = rgb.get_pixel(x as u32, y as u32).0;
                base.color[y * w + x] = p.map(f64::from);
                base.count[y * w + x] = 1;
            }
        }
    }
    let mut levels = vec![base];
    while levels.last().is_some_and(|l| l.width > 1 || l.height > 1) {
        let prev = levels.last().unwrap();
        let (nw, nh) = (prev.width.div_ceil(2), prev.height.div_ceil(2));
        let mut next = Level {
            width: nw,
            height: nh,
            color: vec![[0.0; 3]; nw * nh],
            count: vec![0; nw * nh],
        };
        for y in 0..nh {
            for x in 0..nw {
                let mut sum = [0.0; 3];
                let mut n = 0u32;
                for (cx, cy) in [(2 * x, 2 * y), (2 * x + 1, 2 * y), (2 * x, 2 * y + 1), (2 * x + 1, 2 * y + 1)] {
                    if cx < prev.width && cy < prev.height {
                        let (c, k) = prev.at(cx, cy);
                        for ch in 0..3 {
                            sum[ch] += c[ch] * k as f64;
                        }
                        n += k;
                    }
                }
                if n > 0 {
                    next.color[y * nw + x] = sum.map(|s| s / n as f64);
                    next.count[y * nw + x] = n;
                }
            }
        }
        levels.push(next);
    }
    levels
}

/// Bilinear sample of `level` at the center of level-0 pixel `(x, y)`, using
/// only cells that have valid pixels beneath them.
fn sample(level: &Level, scale: f64, x: usize, y: usize) -> Option<[f64; 3]> {
    let fx = (x as f64 + 0.5) / scale - 0.5;
    let fy = (y as f64 + 0.5) / scale - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let (ax, ay) = (fx - x0, fy - y0);
    let mut acc = [0.0; 3];
    let mut wsum = 0.0;
    for (dx, wx) in [(0.0, 1.0 - ax), (1.0, ax)] {
        for (dy, wy) in [(0.0, 1.0 - ay), (1.0, ay)] {
            let cx = (x0 + dx).clamp(0.0, level.width as f64 - 1.0) as usize;
            let cy = (y0 + dy).clamp(0.0, level.height as f64 - 1.0) as usize;
            let (c, n) = level.at(cx, cy);
            let wgt = wx * wy;
            if n > 0 && wgt > 0.0 {
                for ch in 0..3 {
                    acc[ch] += c[ch] * wgt;
                }
                wsum += wgt;
            }
        }
    }
    (wsum > 0.0).then(|| acc.map(|a| a / wsum))
}

/// Fills every invalid pixel from the finest pyramid level whose cell above
/// it contains valid pixels. Valid pixels are returned unchanged.
pub fn inpaint_pullpush(rgb: &RgbImage, valid: &Mask) -> RgbImage {
    assert_eq!(rgb.dimensions(), valid.dimensions(), "mask must match image");
    let (w, h) = rgb.dimensions();
    if valid.count() == 0 {
        return RgbImage::from_pixel(w, h, Rgb([NEUTRAL_GREY; 3]));
    }
    let levels = pull(rgb, valid);
    let mut out = rgb.clone();
    for y in 0..h as usize {
        for x in 0..w as usize {
            if valid.get(x as u32, y as u32) {
                continue;
            }
            for (l, level) in levels.iter().enumerate().skip(1) {
                let (cx, cy) = ((x >> l).min(level.width - 1), (y >> l).min(level.height - 1));
                if level.at(cx, cy).1 == 0 {
                    continue;
                }
                if let Some(c) = sample(level, (1u64 << l) as f64, x, y) {
                    out.put_pixel(x as u32, y as u32, Rgb(c.map(|v| v.round().clamp(0.0, 255.0) as u8)));
                    break;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_image(w: u32, h: u32, seed: u64) -> RgbImage {
        let mut rng = SeededRng::new(seed);
        RgbImage::from_fn(w, h, |_, _| {
            Rgb([0, 0, 0].map(|_: u8| (rng.uniform() * 256.0) as u8))
        })
    }

    #[test]
    fn fully_valid_is_unchanged() {
        let img = random_image(37, 21, 1);
        assert_eq!(inpaint_pullpush(&img, &Mask::new(37, 21, true)), img);
    }

    #[test]
    fn fully_invalid_is_grey() {
        let img = random_image(8, 8, 2);
        let out = inpaint_pullpush(&img, &Mask::new(8, 8, false));
        assert!(out.pixels().all(|p| p.0 == [NEUTRAL_GREY; 3]));
    }

    #[test]
    fn single_valid_pixel_floods_image() {
        let img = RgbImage::from_pixel(13, 9, Rgb([10, 200, 30]));
        let mut m = Mask::new(13, 9, false);
        m.set(12, 8, true);
        let out = inpaint_pullpush(&img, &m);
        assert!(out.pixels().all(|p| p.0 == [10, 200, 30]));
    }

    #[test]
    fn checkerboard_fill_stays_in_local_range() {
        let (w, h) = (64u32, 48u32);
        let img = random_image(w, h, 3);
        let mut m = Mask::new(w, h, false);
        for y in 0..h {
            for x in 0..w {
                m.set(x, y, (x + y) % 2 == 0);
            }
        }
        let out = inpaint_pullpush(&img, &m);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                if m.get(x as u32, y as u32) {
                    assert_eq!(out.get_pixel(x as u32, y as u32), img.get_pixel(x as u32, y as u32));
                    continue;
                }
                // Level-1 bilinear weights reach valid pixels at most 2 away.
                for ch in 0..3 {
                    let mut lo = 255u8;
                    let mut hi = 0u8;
                    for yy in (y - 2).max(0)..=(y + 2).min(h as i64 - 1) {
                        for xx in (x - 2).max(0)..=(x + 2).min(w as i64 - 1) {
                            if m.get(xx as u32, yy as u32) {
                                let v = img.get_pixel(xx as u32, yy as u32).0[ch];
                                lo = lo.min(v);
                                hi = hi.max(v);
                            }
                        }
                    }
                    let v = out.get_pixel(x as u32, y as u32).0[ch];
                    assert!(lo <= v && v <= hi, "({x},{y}) ch{ch}: {v} not in [{lo},{hi}]");
                }
            }
        }
    }

    #[test]
    fn hole_in_constant_region_is_filled_exactly() {
        let img = RgbImage::from_pixel(32, 32, Rgb([90, 60, 30]));
        let mut m = Mask::new(32, 32, true);
        for y in 10..20 {
            for x in 5..25 {
                m.set(x, y, false);
            }
        }
        let out = inpaint_pullpush(&img, &m);
        assert_eq!(out, img);
    }
}
