//! Emulated monocular depth-estimator error.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VistaError};
use crate::imaging::DepthMap;
use crate::rng::SeededRng;

const GRID: usize = 8;
/// Multiplicative factors are floored here so depth stays positive.
const MIN_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthNoise {
    /// Standard deviation of the global scale factor (dimensionless).
    pub scale_sigma: f64,
    /// Standard deviation of the low-frequency distortion, meters.
    pub blob_sigma: f64,
}

impl Default for DepthNoise {
    fn default() -> Self {
        Self {
            scale_sigma: 0.05,
            blob_sigma: 0.02,
        }
    }
}

impl DepthNoise {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("scale_sigma", self.scale_sigma), ("blob_sigma", self.blob_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(VistaError::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// `depth · s · (1 + b(u, v))` with a global scale `s ~ N(1, scale_sigma²)`
/// and `b` a bilinearly upsampled 8×8 Gaussian grid with standard deviation
/// `blob_sigma / mean_depth`. Empty (infinite) pixels stay empty.
pub fn perturb_depth(depth: &DepthMap, rng: &mut SeededRng, noise: &DepthNoise) -> DepthMap {
    let scale = rng.normal(1.0, noise.scale_sigma);
    let mut grid = [[0.0f64; GRID]; GRID];
    for row in grid.iter_mut() {
        for g in row.iter_mut() {
            *g = rng.standard_normal();
        }
    }
    if noise.scale_sigma == 0.0 && noise.blob_sigma == 0.0 {
        return depth.clone();
    }
    let scale = scale.max(MIN_FACTOR);
    let blob_scale = match depth.mean_finite() {
        Some(mean) if mean > 0.0 => noise.blob_sigma / mean,
        _ => 0.0,
    };
    let (w, h) = depth.dimensions();
    let mut out = depth.clone();
    for y in 0..h {
        let gy = grid_coord(y, h);
        for x in 0..w {
            let d = depth.get(x, y);
            if !d.is_finite() {
                continue;
            }
            let gx = grid_coord(x, w);
            let b = blob_scale * bilinear(&grid, gx, gy);
            out.set(x, y, d * scale * (1.0 + b).max(MIN_FACTOR));
        }
    }
    out
}

/// Maps a pixel index onto continuous grid coordinates in `[0, GRID − 1]`.
fn grid_coord(i: u32, n: u32) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    i as f64 * (GRID - 1) as f64 / (n - 1) as f64
}

fn bilinear(grid: &[[f64; GRID]; GRID], x: f64, y: f64) -> f64 {
    let x0 = (x.floor() as usize).min(GRID - 2);
    let y0 = (y.floor() as usize).min(GRID - 2);
    let (ax, ay) = (x - x0 as f64, y - y0 as f64);
    let top = grid[y0][x0] * (1.0 - ax) + grid[y0][x0 + 1] * ax;
    let bottom = grid[y0 + 1][x0] * (1.0 - ax) + grid[y0 + 1][x0 + 1] * ax;
    top * (1.0 - ay) + bottom * ay
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: u32, h: u32) -> DepthMap {
        let data = (0..w * h).map(|i| 0.5 + (i % 97) as f64 * 0.01).collect();
        DepthMap::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let d = ramp(20, 10);
        let none = DepthNoise {
            scale_sigma: 0.0,
            blob_sigma: 0.0,
        };
        assert_eq!(perturb_depth(&d, &mut SeededRng::new(1), &none), d);
    }

    #[test]
    fn scale_error_matches_half_normal_mean() {
        let d = ramp(100, 100);
        let noise = DepthNoise {
            scale_sigma: 0.05,
            blob_sigma: 0.0,
        };
        let mut total = 0.0;
        let samples = 100;
        for s in 0..samples {
            let out = perturb_depth(&d, &mut SeededRng::new(s), &noise);
            let rel: f64 = d
                .as_slice()
                .iter()
                .zip(out.as_slice())
                .map(|(a, b)| ((b - a) / a).abs())
                .sum::<f64>()
                / 10_000.0;
            total += rel;
        }
        let mean = total / samples as f64;
        let expected = 0.05 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expected).abs() / expected < 0.10, "{mean} vs {expected}");
    }

    #[test]
    fn output_stays_positive() {
        let d = ramp(40, 30);
        let noise = DepthNoise {
            scale_sigma: 0.19,
            blob_sigma: 0.05,
        };
        for s in 0..500 {
            let out = perturb_depth(&d, &mut SeededRng::new(s), &noise);
            assert!(out.as_slice().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn empty_pixels_stay_empty() {
        let mut d = ramp(8, 8);
        d.set(3, 3, f64::INFINITY);
        let out = perturb_depth(&d, &mut SeededRng::new(0), &DepthNoise::default());
        assert!(out.get(3, 3).is_infinite());
        assert_ne!(out.get(0, 0), d.get(0, 0));
    }
}
