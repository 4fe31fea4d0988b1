//! k-nearest-neighbour behaviour cloning over downsampled pixels.
//!
//! # File format
//!
//! ```text
//! offset  size   content
//! 0       8      b"VISTAKNN"
//! 8       4      format version, u32 LE (currently 1)
//! 12      4      length L of the JSON header, u32 LE
//! 16      L      JSON header: {"k", "features": FeatureConfig, "n", "dim",
//!                              "camera_world_from_camera", "intrinsics"}
//! 16+L    4·N·D  feature matrix, row-major f32 LE, rows unit length
//! ...     4·N·4  action matrix, row-major f32 LE, [dx, dy, dz, close]
//! ```

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Result, VistaError};
use crate::geometry::{Intrinsics, RigidTransform};
use crate::imaging::RgbImage;
use crate::scenesim::{Action, Observation};

pub const MAGIC: &[u8; 8] = b"VISTAKNN";
pub const POLICY_VERSION: u32 = 1;
pub const DEFAULT_FEAT_SIZE: u32 = 24;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub feat_size: u32,
    #[serde(default)]
    pub use_wrist: bool,
    #[serde(default)]
    pub use_proprio: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            feat_size: DEFAULT_FEAT_SIZE,
            use_wrist: false,
            use_proprio: false,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.feat_size < 4 {
            return Err(VistaError::InvalidParameter {
                name: "feat_size",
                reason: format!("must be at least 4, got {}", self.feat_size),
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        let view = 3 * (self.feat_size as usize).pow(2);
        view * (1 + usize::from(self.use_wrist)) + if self.use_proprio { 4 } else { 0 }
    }
}

/// Overlap weights of source cells `0..src` with output cell `i` of `dst`.
fn area_weights(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let (lo, hi) = (i as f64 * scale, (i + 1) as f64 * scale);
            let mut w = Vec::new();
            let mut j = lo.floor() as usize;
            while (j as f64) < hi && j < src as usize {
                let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)) / scale;
                if overlap > 0.0 {
                    w.push((j, overlap));
                }
                j += 1;
            }
            w
        })
        .collect()
}

/// Area-average downsampling to `size × size`, values in `[0, 1]`, HWC order.
pub fn area_downsample(img: &RgbImage, size: u32) -> Result<Vec<f32>> {
    let (w, h) = img.dimensions();
    if w < size || h < size {
        return Err(VistaError::InvalidParameter {
            name: "feat_size",
            reason: format!("image is {w}×{h}, smaller than the {size}×{size} feature grid"),
        });
    }
    let wx = area_weights(w, size);
    let wy = area_weights(h, size);
    // Horizontal pass into `size × h`, then vertical.
    let mut rows = vec![0.0f64; size as usize * h as usize * 3];
    for y in 0..h as usize {
        for (ox, weights) in wx.iter().enumerate() {
            for &(x, wt) in weights {
                let p = img.get_pixel(x as u32, y as u32).0;
                for c in 0..3 {
                    rows[(y * size as usize + ox) * 3 + c] += wt * p[c] as f64;
                }
            }
        }
    }
    let mut out = vec![0.0f32; (size * size * 3) as usize];
    for (oy, weights) in wy.iter().enumerate() {
        for ox in 0..size as usize {
            for c in 0..3 {
                let v: f64 = weights
                    .iter()
                    .map(|&(y, wt)| wt * rows[(y * size as usize + ox) * 3 + c])
                    .sum();
                out[(oy * size as usize + ox) * 3 + c] = (v / 255.0) as f32;
            }
        }
    }
    Ok(out)
}

/// Feature vector of an observation: downsampled views, then proprio, L2-normalized.
pub fn featurize(obs: &Observation, cfg: &FeatureConfig) -> Result<Vec<f32>> {
    cfg.validate()?;
    let mut f = area_downsample(&obs.third_person_rgb, cfg.feat_size)?;
    if cfg.use_wrist {
        let wrist = obs.wrist_rgb.as_ref().ok_or_else(|| VistaError::InvalidParameter {
            name: "use_wrist",
            reason: "observation has no wrist image".into(),
        })?;
        f.extend(area_downsample(wrist, cfg.feat_size)?);
    }
    if cfg.use_proprio {
        f.extend(obs.proprio.iter().map(|&v| v as f32));
    }
    let norm = f.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in f.iter_mut() {
            *v = (*v as f64 / norm) as f32;
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    k: usize,
    features: FeatureConfig,
    n: usize,
    dim: usize,
    camera_world_from_camera: RigidTransform,
    intrinsics: Intrinsics,
}

/// A fitted k-NN policy. Immutable after fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnPolicy {
    k: usize,
    config: FeatureConfig,
    dim: usize,
    features: Vec<f32>,
    actions: Vec<[f32; 4]>,
    camera: RigidTransform,
    intrinsics: Intrinsics,
}

fn row_cmp(a: (&[f32], &[f32; 4]), b: (&[f32], &[f32; 4])) -> Ordering {
    a.0.iter()
        .chain(a.1)
        .zip(b.0.iter().chain(b.1))
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl KnnPolicy {
    /// Builds a policy from feature rows and actions. Rows are sorted so that
    /// the policy does not depend on the order samples were supplied in.
    pub fn from_samples(
        samples: Vec<(Vec<f32>, [f32; 4])>,
        config: FeatureConfig,
        k: usize,
        camera: RigidTransform,
        intrinsics: Intrinsics,
    ) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(VistaError::EmptyDataset);
        }
        if k == 0 {
            return Err(VistaError::InvalidParameter {
                name: "k",
                reason: "must be at least 1".into(),
            });
        }
        if k > samples.len() {
            return Err(VistaError::KTooLarge {
                k,
                n: samples.len(),
            });
        }
        let dim = config.dim();
        if let Some((f, _)) = samples.iter().find(|(f, _)| f.len() != dim) {
            return Err(VistaError::DimensionMismatch {
                a: (dim as u32, 1),
                b: (f.len() as u32, 1),
            });
        }
        let mut samples = samples;
        samples.sort_by(|a, b| row_cmp((&a.0, &a.1), (&b.0, &b.1)));
        let mut features = Vec::with_capacity(samples.len() * dim);
        let mut actions = Vec::with_capacity(samples.len());
        for (f, a) in samples {
            features.extend(f);
            actions.push(a);
        }
        Ok(Self {
            k,
            config,
            dim,
            features,
            actions,
            camera,
            intrinsics,
        })
    }

    /// Stores every frame of `dataset` as a sample.
    pub fn fit(dataset: &Dataset, config: FeatureConfig, k: usize) -> Result<Self> {
        config.validate()?;
        let m = dataset.manifest();
        if config.use_wrist && !m.wrist {
            return Err(VistaError::InvalidDataset(format!(
                "{}: wrist features requested but the dataset has no wrist frames",
                dataset.root().display()
            )));
        }
        let mut samples = Vec::new();
        for i in 0..dataset.num_trajectories() {
            let traj = dataset.load_trajectory(i)?;
            if config.use_proprio && traj.states.is_none() {
                return Err(VistaError::InvalidDataset(format!(
                    "{}: proprio features need states.json",
                    dataset.traj_dir(i).display()
                )));
            }
            for t in 0..traj.len() {
                let obs = Observation {
                    third_person_rgb: traj.frames[t].clone(),
                    wrist_rgb: traj.wrist.as_ref().map(|w| w[t].clone()),
                    proprio: traj
                        .states
                        .as_ref()
                        .map(|s| Observation::proprio_of(&s[t]))
                        .unwrap_or_default(),
                };
                let a = traj.actions[t];
                samples.push((
                    featurize(&obs, &config)?,
                    [a[0] as f32, a[1] as f32, a[2] as f32, a[3] as f32],
                ));
            }
        }
        Self::from_samples(
            samples,
            config,
            k,
            m.camera_world_from_camera,
            m.intrinsics(),
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn feature_config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Third-person camera of the training data.
    pub fn camera(&self) -> RigidTransform {
        self.camera
    }

    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn action_row(&self, i: usize) -> [f32; 4] {
        self.actions[i]
    }

    /// Indices of the `k` nearest stored rows, nearest first; ties go to the lower index.
    pub fn neighbors(&self, query: &[f32]) -> Result<Vec<usize>> {
        if query.len() != self.dim {
            return Err(VistaError::DimensionMismatch {
                a: (self.dim as u32, 1),
                b: (query.len() as u32, 1),
            });
        }
        let mut best: Vec<(f32, usize)> = Vec::with_capacity(self.k + 1);
        for i in 0..self.len() {
            let d = squared_distance(query, self.feature_row(i));
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(self.k);
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    pub fn act_features(&self, query: &[f32]) -> Result<Action> {
        let idx = self.neighbors(query)?;
        let mut delta = [0.0f64; 3];
        let mut closes = 0;
        for &i in &idx {
            let a = self.actions[i];
            for (d, v) in delta.iter_mut().zip(a) {
                *d += v as f64;
            }
            closes += usize::from(a[3] >= 0.5);
        }
        let n = idx.len() as f64;
        Ok(Action {
            delta_gripper: [delta[0] / n, delta[1] / n, delta[2] / n].into(),
            close: 2 * closes >= idx.len(),
        })
    }

    /// Mean neighbour delta and majority-vote gripper (ties close).
    pub fn act(&self, obs: &Observation) -> Result<Action> {
        self.act_features(&featurize(obs, &self.config)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&Header {
            k: self.k,
            features: self.config,
            n: self.len(),
            dim: self.dim,
            camera_world_from_camera: self.camera,
            intrinsics: self.intrinsics,
        })
        .expect("policy header serializes");
        let mut out =
            Vec::with_capacity(16 + header.len() + 4 * (self.features.len() + 4 * self.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&POLICY_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.features {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for a in &self.actions {
            for v in a {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| VistaError::InvalidPolicyFile(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing VISTAKNN magic"));
        }
        let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let version = word(8);
        if version != POLICY_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let hlen = word(12) as usize;
        let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
        let header: Header =
            serde_json::from_slice(body).map_err(|e| bad(&format!("header: {e}")))?;
        if header.dim != header.features.dim() {
            return Err(bad("header dim does not match the feature config"));
        }
        let floats = header.n * (header.dim + 4);
        let data = &bytes[16 + hlen..];
        if data.len() != 4 * floats {
            return Err(bad(&format!(
                "expected {} bytes of matrix data, found {}",
                4 * floats,
                data.len()
            )));
        }
        let mut vals = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let features: Vec<f32> = vals.by_ref().take(header.n * header.dim).collect();
        let actions: Vec<[f32; 4]> = (0..header.n)
            .map(|_| std::array::from_fn(|_| vals.next().unwrap()))
            .collect();
        if header.k == 0 || header.k > header.n {
            return Err(bad("k out of range"));
        }
        Ok(Self {
            k: header.k,
            config: header.features,
            dim: header.dim,
            features,
            actions,
            camera: header.camera_world_from_camera,
            intrinsics: header.intrinsics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| VistaError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| VistaError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            VistaError::InvalidPolicyFile(m) => {
                VistaError::InvalidPolicyFile(format!("{}: {m}", path.display()))
            }
            e => e,
        })
    }
}

fn squared_distance(a: &[f32], b: &[f32]) -> f32 {
    const LANES: usize = 8;
    let mut acc = [0.0f32; LANES];
    let (ca, ra) = a.split_at(a.len() / LANES * LANES);
    let (cb, rb) = b.split_at(ca.len());
    for (x, y) in ca.chunks_exact(LANES).zip(cb.chunks_exact(LANES)) {
        for l in 0..LANES {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let tail: f32 = ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum();
    acc.iter().sum::<f32>() + tail
}
