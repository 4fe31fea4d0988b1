//! On-disk trajectory datasets (format version 1).
//!
//! ```text
//! <root>/manifest.json
//! <root>/traj_%05d/frames/%06d.png   third-person RGB, one per transition
//! <root>/traj_%05d/wrist/%06d.png    wrist RGB (when `wrist` is true)
//! <root>/traj_%05d/actions.json      T rows of [dx, dy, dz, close]
//! <root>/traj_%05d/poses.json        per-frame target extrinsics (augmented only)
//! <root>/traj_%05d/states.json       per-frame simulator state (generated datasets)
//! <root>/traj_%05d/augment.json      per-frame augmentation outcome (augmented only)
//! ```
//!
//! The manifest is written last, so a directory without one is incomplete.
//! Poses are 4×4 row-major world-from-camera matrices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VistaError};
use crate::geometry::{CameraPose, Intrinsics, RigidTransform};
use crate::imaging::{load_png, save_png, RgbImage};
use crate::posesample::ViewDistribution;
use crate::scenesim::TaskState;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
    pub camera_world_from_camera: RigidTransform,
    pub num_trajectories: usize,
    pub seed: u64,
    pub wrist: bool,
    pub augmentation: Option<AugmentationRecord>,
}

impl Manifest {
    pub fn intrinsics(&self) -> Intrinsics {
        Intrinsics {
            fov_deg: self.fov_deg,
            width: self.width,
            height: self.height,
        }
    }

    pub fn camera(&self) -> CameraPose {
        CameraPose::new(self.camera_world_from_camera)
    }
}

/// Provenance of an augmented dataset: the exact configuration plus outcome counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub backend: String,
    pub distribution: ViewDistribution,
    pub copies: usize,
    pub eta: f64,
    pub max_tries: u32,
    pub seed: u64,
    pub keep_original: bool,
    pub depth_noise: Option<DepthNoiseRecord>,
    pub stats: AugmentStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthNoiseRecord {
    pub scale_sigma: f64,
    pub blob_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentStats {
    /// Augmented frames (excludes kept originals).
    pub frames: usize,
    pub accepted: usize,
    /// Frames that needed more than one synthesis attempt.
    pub retried: usize,
    pub fallbacks: usize,
    pub attempts: usize,
}

/// Outcome of augmenting one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameProvenance {
    pub attempts: u32,
    pub accepted: bool,
    /// Perceptual distance of the last synthesized candidate.
    pub distance: f64,
    /// Distance between the context and the last sampled target camera centers.
    pub translation: f64,
    /// False for frames copied from the source dataset as copy 0.
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub frames: Vec<RgbImage>,
    pub wrist: Option<Vec<RgbImage>>,
    pub actions: Vec<[f64; 4]>,
    pub states: Option<Vec<TaskState>>,
    pub poses: Option<Vec<RigidTransform>>,
    pub provenance: Option<Vec<FrameProvenance>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn check(&self) -> Result<()> {
        let t = self.actions.len();
        let bad = |what: &str, n: usize| {
            Err(VistaError::InvalidDataset(format!(
                "{what} has {n} entries but the trajectory has {t} actions"
            )))
        };
        if self.frames.len() != t {
            return bad("frames", self.frames.len());
        }
        if let Some(w) = &self.wrist {
            if w.len() != t {
                return bad("wrist", w.len());
            }
        }
        if let Some(s) = &self.states {
            if s.len() != t {
                return bad("states", s.len());
            }
        }
        if let Some(p) = &self.poses {
            if p.len() != t {
                return bad("poses", p.len());
            }
        }
        if let Some(p) = &self.provenance {
            if p.len() != t {
                return bad("augment", p.len());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    /// Prepares an output directory. An existing non-empty directory is only
    /// replaced when `force` is set and it holds a dataset manifest.
    pub fn create(root: &Path, manifest: Manifest, force: bool) -> Result<Self> {
        if root.exists() {
            let non_empty = fs::read_dir(root)
                .map_err(|e| VistaError::io(root, e))?
                .next()
                .is_some();
            if non_empty {
                if !force {
                    return Err(VistaError::io(
                        root,
                        std::io::Error::new(
                            std::io::ErrorKind::AlreadyExists,
                            "output directory is not empty (pass --force to overwrite)",
                        ),
                    ));
                }
                if !root.join(MANIFEST_FILE).exists() {
                    return Err(VistaError::io(
                        root,
                        std::io::Error::new(
                            std::io::ErrorKind::AlreadyExists,
                            "refusing to overwrite a non-empty directory that is not a dataset",
                        ),
                    ));
                }
                fs::remove_dir_all(root).map_err(|e| VistaError::io(root, e))?;
            }
        }
        fs::create_dir_all(root).map_err(|e| VistaError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let manifest: Manifest = read_json(&path)?;
        if manifest.version != FORMAT_VERSION {
            return Err(VistaError::InvalidDataset(format!(
                "{}: unsupported dataset version {}",
                path.display(),
                manifest.version
            )));
        }
        manifest
            .intrinsics()
            .validate()
            .map_err(|e| VistaError::InvalidDataset(format!("{}: {e}", path.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn manifest_mut(&mut self) -> &mut Manifest {
        &mut self.manifest
    }

    pub fn num_trajectories(&self) -> usize {
        self.manifest.num_trajectories
    }

    pub fn write_manifest(&self) -> Result<()> {
        write_json(&self.root.join(MANIFEST_FILE), &self.manifest)
    }

    pub fn traj_dir(&self, index: usize) -> PathBuf {
        self.root.join(format!("traj_{index:05}"))
    }

    pub fn frame_path(&self, index: usize, t: usize) -> PathBuf {
        self.traj_dir(index).join("frames").join(format!("{t:06}.png"))
    }

    pub fn load_actions(&self, index: usize) -> Result<Vec<[f64; 4]>> {
        read_json(&self.traj_dir(index).join("actions.json"))
    }

    pub fn load_states(&self, index: usize) -> Result<Option<Vec<TaskState>>> {
        read_optional_json(&self.traj_dir(index).join("states.json"))
    }

    pub fn load_provenance(&self, index: usize) -> Result<Option<Vec<FrameProvenance>>> {
        read_optional_json(&self.traj_dir(index).join("augment.json"))
    }

    pub fn load_frame(&self, index: usize, t: usize) -> Result<RgbImage> {
        let img = load_png(&self.frame_path(index, t))?;
        let (w, h) = (self.manifest.width, self.manifest.height);
        if img.dimensions() != (w, h) {
            return Err(VistaError::InvalidDataset(format!(
                "{}: frame is {:?}, manifest says {w}×{h}",
                self.frame_path(index, t).display(),
                img.dimensions()
            )));
        }
        Ok(img)
    }

    pub fn load_trajectory(&self, index: usize) -> Result<Trajectory> {
        let dir = self.traj_dir(index);
        let actions = self.load_actions(index)?;
        let frames = (0..actions.len())
            .map(|t| self.load_frame(index, t))
            .collect::<Result<Vec<_>>>()?;
        let wrist = if self.manifest.wrist {
            Some(
                (0..actions.len())
                    .map(|t| load_png(&dir.join("wrist").join(format!("{t:06}.png"))))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        let poses: Option<Vec<Vec<f64>>> = read_optional_json(&dir.join("poses.json"))?;
        let poses = poses
            .map(|rows| {
                rows.iter()
                    .map(|r| RigidTransform::from_row_major(r))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let traj = Trajectory {
            frames,
            wrist,
            actions,
            states: self.load_states(index)?,
            poses,
            provenance: self.load_provenance(index)?,
        };
        traj.check()
            .map_err(|e| VistaError::InvalidDataset(format!("{}: {e}", dir.display())))?;
        Ok(traj)
    }

    pub fn write_trajectory(&self, index: usize, traj: &Trajectory) -> Result<()> {
        traj.check()?;
        if traj.wrist.is_some() != self.manifest.wrist {
            return Err(VistaError::InvalidDataset(
                "wrist frames must be present exactly when the manifest enables them".into(),
            ));
        }
        let dir = self.traj_dir(index);
        let frames_dir = dir.join("frames");
        fs::create_dir_all(&frames_dir).map_err(|e| VistaError::io(&frames_dir, e))?;
        for (t, img) in traj.frames.iter().enumerate() {
            save_png(&frames_dir.join(format!("{t:06}.png")), img)?;
        }
        if let Some(wrist) = &traj.wrist {
            let wrist_dir = dir.join("wrist");
            fs::create_dir_all(&wrist_dir).map_err(|e| VistaError::io(&wrist_dir, e))?;
            for (t, img) in wrist.iter().enumerate() {
                save_png(&wrist_dir.join(format!("{t:06}.png")), img)?;
            }
        }
        write_json(&dir.join("actions.json"), &traj.actions)?;
        if let Some(states) = &traj.states {
            write_json(&dir.join("states.json"), states)?;
        }
        if let Some(poses) = &traj.poses {
            let rows: Vec<[f64; 16]> = poses.iter().map(|p| p.to_row_major()).collect();
            write_json(&dir.join("poses.json"), &rows)?;
        }
        if let Some(prov) = &traj.provenance {
            write_json(&dir.join("augment.json"), prov)?;
        }
        Ok(())
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| VistaError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|source| VistaError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn read_optional_json<T: DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.exists() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| VistaError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| VistaError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn manifest(n: usize, wrist: bool) -> Manifest {
        Manifest {
            version: FORMAT_VERSION,
            fov_deg: 45.0,
            width: 8,
            height: 6,
            camera_world_from_camera: RigidTransform::rot_z(0.3),
            num_trajectories: n,
            seed: 0,
            wrist,
            augmentation: None,
        }
    }

    fn traj(len: usize, wrist: bool) -> Trajectory {
        let img = |t: usize| RgbImage::from_pixel(8, 6, Rgb([t as u8, 2, 3]));
        Trajectory {
            frames: (0..len).map(img).collect(),
            wrist: wrist.then(|| (0..len).map(img).collect()),
            actions: (0..len).map(|t| [0.1 * t as f64, -0.013, 1.0 / 3.0, 1.0]).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn write_then_open() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        let ds = Dataset::create(&root, manifest(1, true), false).unwrap();
        let t = traj(3, true);
        ds.write_trajectory(0, &t).unwrap();
        ds.write_manifest().unwrap();
        let back = Dataset::open(&root).unwrap();
        assert_eq!(back.manifest(), ds.manifest());
        assert_eq!(back.load_trajectory(0).unwrap(), t);
        let text = fs::read_to_string(root.join(MANIFEST_FILE)).unwrap();
        let raw: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(raw["camera_world_from_camera"].as_array().unwrap().len(), 16);
        assert!(raw["augmentation"].is_null());
    }

    #[test]
    fn refuses_non_empty_output_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        let ds = Dataset::create(&root, manifest(0, false), false).unwrap();
        ds.write_manifest().unwrap();
        let err = Dataset::create(&root, manifest(0, false), false).unwrap_err();
        assert!(err.is_io());
        assert!(Dataset::create(&root, manifest(0, false), true).is_ok());

        let other = dir.path().join("other");
        fs::create_dir_all(&other).unwrap();
        fs::write(other.join("notes.txt"), "keep").unwrap();
        assert!(Dataset::create(&other, manifest(0, false), true).is_err());
        assert!(other.join("notes.txt").exists());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::create(dir.path(), manifest(1, false), false).unwrap();
        let mut t = traj(3, false);
        t.frames.pop();
        assert!(ds.write_trajectory(0, &t).is_err());
    }

    #[test]
    fn missing_dataset_is_io_error() {
        let err = Dataset::open(Path::new("/nonexistent/ds")).unwrap_err();
        assert!(err.is_io());
    }
}
