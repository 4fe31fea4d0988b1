//! Perceptual rejection of synthesized views.
//!
//! The distance is multi-scale structural dissimilarity: SSIM with an 11×11
//! Gaussian window (σ = 1.5), computed per RGB channel at full, half and
//! quarter resolution, mapped to `(1 − SSIM) / 2` and averaged over scales.
//! Identical images score exactly 0; the score is symmetric and in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VistaError};
use crate::imaging::RgbImage;

pub const DEFAULT_ETA: f64 = 0.35;
pub const DEFAULT_MAX_TRIES: u32 = 5;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const SCALES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterParams {
    pub eta: f64,
    pub max_tries: u32,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            max_tries: DEFAULT_MAX_TRIES,
        }
    }
}

impl FilterParams {
    /// `eta = 0` is accepted: it rejects every candidate.
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) {
            return Err(VistaError::InvalidParameter {
                name: "eta",
                reason: format!("must be non-negative, got {}", self.eta),
            });
        }
        if self.max_tries == 0 {
            return Err(VistaError::InvalidParameter {
                name: "max_tries",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn channel(img: &RgbImage, ch: usize) -> Self {
        Self {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.pixels().map(|p| p.0[ch] as f64).collect(),
        }
    }

    /// 2×2 box average; a trailing odd row or column is dropped.
    fn downsample(&self) -> Self {
        let (w, h) = ((self.width / 2).max(1), (self.height / 2).max(1));
        if self.width < 2 || self.height < 2 {
            return Self {
                width: self.width,
                height: self.height,
                data: self.data.clone(),
            };
        }
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let i = 2 * y * self.width + 2 * x;
                let s = self.data[i]
                    + self.data[i + 1]
                    + self.data[i + self.width]
                    + self.data[i + self.width + 1];
                data.push(s / 4.0);
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }

    fn product(&self, other: &Plane) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }

    /// Separable valid-region filtering with `kernel`.
    fn filter(&self, kernel: &[f64]) -> Plane {
        let k = kernel.len();
        let (w, h) = (self.width - k + 1, self.height - k + 1);
        let mut rows = vec![0.0; w * self.height];
        for y in 0..self.height {
            let src = &self.data[y * self.width..(y + 1) * self.width];
            for x in 0..w {
                rows[y * w + x] = kernel.iter().zip(&src[x..x + k]).map(|(a, b)| a * b).sum();
            }
        }
        let mut data = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                data[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(j, kv)| kv * rows[(y + j) * w + x])
                    .sum();
            }
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }

    fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

fn gaussian_kernel() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let raw: Vec<f64> = (0..WINDOW)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

fn ssim_term(mu_a: f64, mu_b: f64, var_a: f64, var_b: f64, cov: f64) -> f64 {
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// Mean SSIM of two planes. Planes smaller than the window use one window
/// spanning the whole plane with uniform weights.
fn ssim(a: &Plane, b: &Plane, kernel: &[f64]) -> f64 {
    if a.width < WINDOW || a.height < WINDOW {
        let (ma, mb) = (a.mean(), b.mean());
        let va = a.product(a).mean() - ma * ma;
        let vb = b.product(b).mean() - mb * mb;
        let cov = a.product(b).mean() - ma * mb;
        return ssim_term(ma, mb, va, vb, cov);
    }
    let mu_a = a.filter(kernel);
    let mu_b = b.filter(kernel);
    let aa = a.product(a).filter(kernel);
    let bb = b.product(b).filter(kernel);
    let ab = a.product(b).filter(kernel);
    let n = mu_a.data.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a.data[i], mu_b.data[i]);
            ssim_term(
                ma,
                mb,
                aa.data[i] - ma * ma,
                bb.data[i] - mb * mb,
                ab.data[i] - ma * mb,
            )
        })
        .sum();
    total / n as f64
}

/// Multi-scale structural dissimilarity in `[0, 1]`.
pub fn perceptual_distance(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if a.dimensions() != b.dimensions() {
        return Err(VistaError::DimensionMismatch {
            a: a.dimensions(),
            b: b.dimensions(),
        });
    }
    if a.width() == 0 || a.height() == 0 {
        return Ok(0.0);
    }
    let kernel = gaussian_kernel();
    let mut total = 0.0;
    for ch in 0..3 {
        let mut pa = Plane::channel(a, ch);
        let mut pb = Plane::channel(b, ch);
        for scale in 0..SCALES {
            if scale > 0 {
                pa = pa.downsample();
                pb = pb.downsample();
            }
            total += (1.0 - ssim(&pa, &pb, &kernel)) / 2.0;
        }
    }
    Ok((total / (3 * SCALES) as f64).clamp(0.0, 1.0))
}

/// Accepts a candidate whose distance to the source is strictly below `eta`.
pub fn accept(source: &RgbImage, candidate: &RgbImage, params: &FilterParams) -> Result<bool> {
    Ok(perceptual_distance(source, candidate)? < params.eta)
}
