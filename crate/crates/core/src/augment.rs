//! Offline viewpoint augmentation of a trajectory dataset.
//!
//! Every third-person frame of every source trajectory is re-rendered from a
//! camera drawn from a [`ViewDistribution`]. A candidate is kept when its
//! perceptual distance to the source frame is below `eta`; otherwise a new
//! target camera is drawn, up to `max_tries` attempts, after which the source
//! frame is kept unchanged. Actions, states and wrist frames are copied.
//!
//! Copy `c` of source trajectory `i` is written as output trajectory
//! `c·N + i`. Each attempt draws from its own stream derived from
//! `(seed, i, t, c, attempt)`, so the output does not depend on scheduling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    AugmentStats, AugmentationRecord, Dataset, DepthNoiseRecord, FrameProvenance, Manifest,
    Trajectory,
};
use crate::error::{Result, VistaError};
use crate::filter::{perceptual_distance, FilterParams};
use crate::geometry::{relative_pose, CameraPose, Intrinsics};
use crate::imaging::RgbImage;
use crate::nvs::{backend_from_id, DepthNoise, FrozenScene, NvsBackend, NvsRequest};
use crate::posesample::ViewDistribution;
use crate::rng::SeededRng;
use crate::scenesim::{render, Scene, TaskState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub backend: String,
    pub distribution: ViewDistribution,
    pub copies: usize,
    pub filter: FilterParams,
    pub seed: u64,
    /// Also write each source trajectory unchanged as copy 0.
    #[serde(default)]
    pub keep_original: bool,
    /// Only read by the `reproject_noisydepth` backend.
    #[serde(default)]
    pub depth_noise: DepthNoise,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            backend: "reproject".into(),
            distribution: ViewDistribution::perturbation(),
            copies: 1,
            filter: FilterParams::default(),
            seed: 0,
            keep_original: false,
            depth_noise: DepthNoise::default(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(VistaError::InvalidParameter {
                name: "copies",
                reason: "must be at least 1".into(),
            });
        }
        self.filter.validate()?;
        self.distribution.validate()?;
        self.depth_noise.validate()?;
        backend_from_id(&self.backend, self.depth_noise).map(|_| ())
    }
}

/// Stream for one synthesis attempt.
pub fn derive_rng(master_seed: u64, traj: usize, t: usize, copy: usize, attempt: u32) -> SeededRng {
    SeededRng::derive(
        master_seed,
        traj as u64,
        t as u64,
        copy as u64,
        attempt as u64,
    )
}

/// Source inputs for augmenting a single frame.
pub struct FrameInput<'a> {
    pub rgb: &'a RgbImage,
    pub context: CameraPose,
    pub intr: Intrinsics,
    /// Simulator state at this frame, when the source dataset recorded it.
    pub state: Option<&'a TaskState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub rgb: RgbImage,
    /// Camera the output frame is seen from; the context camera on fallback.
    pub pose: CameraPose,
    pub provenance: FrameProvenance,
}

/// Runs the sample–synthesize–filter loop for frame `t` of trajectory `traj`, copy `copy`.
pub fn augment_frame(
    input: &FrameInput<'_>,
    backend: &dyn NvsBackend,
    cfg: &AugmentConfig,
    traj: usize,
    t: usize,
    copy: usize,
) -> Result<FrameOutput> {
    let frozen = input.state.map(|s| FrozenScene {
        scene: Scene::default_tabletop(s),
        context: input.context,
    });
    let depth = if backend.needs_depth() {
        let frozen = frozen.as_ref().ok_or(VistaError::MissingDepth)?;
        Some(render(&frozen.scene, &input.context, &input.intr).1)
    } else {
        None
    };
    let mut last = (f64::NAN, 0.0);
    for attempt in 1..=cfg.filter.max_tries {
        let mut rng = derive_rng(cfg.seed, traj, t, copy, attempt);
        let target = cfg.distribution.sample(&input.context, &mut rng)?;
        let req = NvsRequest {
            rgb: input.rgb,
            depth: depth.as_ref(),
            intr: input.intr,
            relative: relative_pose(&input.context, &target),
            scene: frozen.as_ref(),
        };
        let candidate = backend.synthesize(&req, &mut rng)?;
        let distance = perceptual_distance(input.rgb, &candidate.rgb)?;
        let translation = (target.position() - input.context.position()).norm();
        if distance < cfg.filter.eta {
            return Ok(FrameOutput {
                rgb: candidate.rgb,
                pose: target,
                provenance: FrameProvenance {
                    attempts: attempt,
                    accepted: true,
                    distance,
                    translation,
                    synthesized: true,
                },
            });
        }
        last = (distance, translation);
    }
    Ok(FrameOutput {
        rgb: input.rgb.clone(),
        pose: input.context,
        provenance: FrameProvenance {
            attempts: cfg.filter.max_tries,
            accepted: false,
            distance: last.0,
            translation: last.1,
            synthesized: true,
        },
    })
}

fn context_poses(manifest: &Manifest, traj: &Trajectory) -> Vec<CameraPose> {
    match &traj.poses {
        Some(poses) => poses.iter().map(|p| CameraPose::new(*p)).collect(),
        None => vec![manifest.camera(); traj.len()],
    }
}

fn augment_trajectory(
    src: &Dataset,
    source: &Trajectory,
    backend: &dyn NvsBackend,
    cfg: &AugmentConfig,
    traj: usize,
    copy: usize,
) -> Result<Trajectory> {
    let intr = src.manifest().intrinsics();
    let contexts = context_poses(src.manifest(), source);
    let mut out = Trajectory {
        frames: Vec::with_capacity(source.len()),
        wrist: source.wrist.clone(),
        actions: source.actions.clone(),
        states: source.states.clone(),
        poses: Some(Vec::with_capacity(source.len())),
        provenance: Some(Vec::with_capacity(source.len())),
    };
    for t in 0..source.len() {
        let input = FrameInput {
            rgb: &source.frames[t],
            context: contexts[t],
            intr,
            state: source.states.as_ref().map(|s| &s[t]),
        };
        let frame = augment_frame(&input, backend, cfg, traj, t, copy).map_err(|e| match e {
            VistaError::MissingDepth | VistaError::OracleUnavailable => {
                VistaError::InvalidDataset(format!(
                    "{}: backend `{}` needs simulator states, which this dataset lacks ({e})",
                    src.traj_dir(traj).display(),
                    backend.id()
                ))
            }
            e => e,
        })?;
        out.frames.push(frame.rgb);
        out.poses.as_mut().unwrap().push(frame.pose.world_from_camera);
        out.provenance.as_mut().unwrap().push(frame.provenance);
    }
    Ok(out)
}

fn original_copy(manifest: &Manifest, source: &Trajectory) -> Trajectory {
    let contexts = context_poses(manifest, source);
    Trajectory {
        poses: Some(contexts.iter().map(|c| c.world_from_camera).collect()),
        provenance: Some(vec![
            FrameProvenance {
                attempts: 0,
                accepted: true,
                distance: 0.0,
                translation: 0.0,
                synthesized: false,
            };
            source.len()
        ]),
        ..source.clone()
    }
}

/// Builds a thread pool with `jobs` workers, or rayon's default when `None` or 0.
pub fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| VistaError::InvalidParameter {
            name: "jobs",
            reason: e.to_string(),
        })
}

/// Augments the dataset at `src` into `out`.
pub fn augment_dataset(
    src: &Dataset,
    cfg: &AugmentConfig,
    out: &Path,
    force: bool,
    jobs: Option<usize>,
) -> Result<Dataset> {
    cfg.validate()?;
    let backend = backend_from_id(&cfg.backend, cfg.depth_noise)?;
    let n = src.num_trajectories();
    if n == 0 {
        return Err(VistaError::EmptyDataset);
    }
    let slots = cfg.copies + usize::from(cfg.keep_original);
    let mut manifest = src.manifest().clone();
    manifest.num_trajectories = slots * n;
    manifest.augmentation = Some(AugmentationRecord {
        backend: cfg.backend.clone(),
        distribution: cfg.distribution,
        copies: cfg.copies,
        eta: cfg.filter.eta,
        max_tries: cfg.filter.max_tries,
        seed: cfg.seed,
        keep_original: cfg.keep_original,
        depth_noise: (backend.id() == "reproject_noisydepth").then_some(DepthNoiseRecord {
            scale_sigma: cfg.depth_noise.scale_sigma,
            blob_sigma: cfg.depth_noise.blob_sigma,
        }),
        stats: AugmentStats::default(),
    });
    let mut dst = Dataset::create(out, manifest, force)?;
    let pool = thread_pool(jobs)?;
    let per_traj: Vec<AugmentStats> = pool.install(|| {
        (0..slots * n)
            .into_par_iter()
            .map(|index| {
                let (slot, i) = (index / n, index % n);
                let source = src.load_trajectory(i)?;
                let traj = if cfg.keep_original && slot == 0 {
                    original_copy(src.manifest(), &source)
                } else {
                    let copy = slot + 1 - usize::from(cfg.keep_original);
                    augment_trajectory(src, &source, backend.as_ref(), cfg, i, copy)?
                };
                dst.write_trajectory(index, &traj)?;
                Ok(stats_of(traj.provenance.as_deref().unwrap_or(&[])))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut stats = AugmentStats::default();
    for s in per_traj {
        stats.frames += s.frames;
        stats.accepted += s.accepted;
        stats.retried += s.retried;
        stats.fallbacks += s.fallbacks;
        stats.attempts += s.attempts;
    }
    dst.manifest_mut().augmentation.as_mut().unwrap().stats = stats;
    dst.write_manifest()?;
    Ok(dst)
}

fn stats_of(prov: &[FrameProvenance]) -> AugmentStats {
    let mut s = AugmentStats::default();
    for p in prov.iter().filter(|p| p.synthesized) {
        s.frames += 1;
        s.accepted += usize::from(p.accepted);
        s.retried += usize::from(p.attempts > 1);
        s.fallbacks += usize::from(!p.accepted);
        s.attempts += p.attempts as usize;
    }
    s
}

/// Summary of an augmented dataset, computed from per-frame provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub frames: usize,
    pub accepted: usize,
    pub retried: usize,
    pub fallbacks: usize,
    pub acceptance_rate: f64,
    pub mean_distance: f64,
    pub mean_translation: f64,
}

pub fn augment_report(dst: &Dataset) -> Result<AugmentReport> {
    if dst.manifest().augmentation.is_none() {
        return Err(VistaError::MissingProvenance(dst.root().display().to_string()));
    }
    let mut all = Vec::new();
    for i in 0..dst.num_trajectories() {
        let prov = dst
            .load_provenance(i)?
            .ok_or_else(|| VistaError::MissingProvenance(dst.traj_dir(i).display().to_string()))?;
        all.extend(prov.into_iter().filter(|p| p.synthesized));
    }
    let s = stats_of(&all);
    let mean = |f: fn(&FrameProvenance) -> f64| {
        if all.is_empty() {
            0.0
        } else {
            all.iter().map(f).sum::<f64>() / all.len() as f64
        }
    };
    Ok(AugmentReport {
        frames: s.frames,
        accepted: s.accepted,
        retried: s.retried,
        fallbacks: s.fallbacks,
        acceptance_rate: if s.frames == 0 {
            0.0
        } else {
            s.accepted as f64 / s.frames as f64
        },
        mean_distance: mean(|p| p.distance),
        mean_translation: mean(|p| p.translation),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posesample::PerturbationParams;
    use crate::scenesim::{default_camera, gen_demos, DemoConfig};

    fn demos(dir: &Path, n: usize, size: u32) -> Dataset {
        gen_demos(
            &DemoConfig {
                n,
                seed: 3,
                camera: default_camera(),
                intrinsics: Intrinsics::new(45.0, size, size).unwrap(),
                wrist: true,
            },
            dir,
            false,
        )
        .unwrap()
    }

    #[test]
    fn zero_sigma_oracle_reproduces_input() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 2, 48);
        let cfg = AugmentConfig {
            backend: "oracle".into(),
            distribution: ViewDistribution::Perturbation(PerturbationParams {
                sigma_t: 0.0,
                sigma_r: 0.0,
            }),
            ..Default::default()
        };
        let dst = augment_dataset(&src, &cfg, &tmp.path().join("out"), false, Some(1)).unwrap();
        for i in 0..2 {
            let (a, b) = (src.load_trajectory(i).unwrap(), dst.load_trajectory(i).unwrap());
            assert_eq!(a.frames, b.frames);
            assert!(b.provenance.unwrap().iter().all(|p| p.accepted && p.distance == 0.0));
        }
    }

    #[test]
    fn copies_preserve_labels_and_shape() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 2, 32);
        let cfg = AugmentConfig {
            backend: "oracle".into(),
            copies: 3,
            seed: 9,
            ..Default::default()
        };
        let dst = augment_dataset(&src, &cfg, &tmp.path().join("out"), false, Some(2)).unwrap();
        assert_eq!(dst.num_trajectories(), 6);
        let mut total = 0;
        for c in 0..3 {
            for i in 0..2 {
                let a = src.load_trajectory(i).unwrap();
                let b = dst.load_trajectory(c * 2 + i).unwrap();
                assert_eq!(a.actions, b.actions);
                assert_eq!(a.wrist, b.wrist);
                assert_eq!(a.states, b.states);
                assert_eq!(b.poses.as_ref().unwrap().len(), a.len());
                total += b.len();
            }
        }
        let src_total: usize = (0..2).map(|i| src.load_actions(i).unwrap().len()).sum();
        assert_eq!(total, 3 * src_total);
        let rec = dst.manifest().augmentation.as_ref().unwrap();
        assert_eq!(rec.stats.frames, total);
        assert_eq!((rec.backend.as_str(), rec.copies), ("oracle", 3));
    }

    #[test]
    fn eta_zero_falls_back_everywhere() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 1, 32);
        let cfg = AugmentConfig {
            filter: FilterParams {
                eta: 0.0,
                max_tries: 2,
            },
            ..Default::default()
        };
        let dst = augment_dataset(&src, &cfg, &tmp.path().join("out"), false, None).unwrap();
        let (a, b) = (src.load_trajectory(0).unwrap(), dst.load_trajectory(0).unwrap());
        assert_eq!(a.frames, b.frames);
        let report = augment_report(&dst).unwrap();
        assert_eq!(report.fallbacks, report.frames);
        assert_eq!(report.accepted, 0);
        assert_eq!(dst.manifest().augmentation.as_ref().unwrap().stats.attempts, 2 * a.len());
        let ctx = src.manifest().camera().world_from_camera;
        assert!(b.poses.unwrap().iter().all(|p| *p == ctx));
    }

    #[test]
    fn keep_original_adds_copy_zero() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 2, 32);
        let cfg = AugmentConfig {
            backend: "oracle".into(),
            keep_original: true,
            ..Default::default()
        };
        let dst = augment_dataset(&src, &cfg, &tmp.path().join("out"), false, None).unwrap();
        assert_eq!(dst.num_trajectories(), 4);
        assert_eq!(dst.load_trajectory(1).unwrap().frames, src.load_trajectory(1).unwrap().frames);
        let report = augment_report(&dst).unwrap();
        let frames: usize = (0..2).map(|i| src.load_actions(i).unwrap().len()).sum();
        assert_eq!(report.frames, frames);
    }

    #[test]
    fn single_frame_reaugmentation_matches() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 2, 32);
        let cfg = AugmentConfig {
            copies: 2,
            seed: 5,
            ..Default::default()
        };
        let dst = augment_dataset(&src, &cfg, &tmp.path().join("out"), false, None).unwrap();
        let backend = backend_from_id(&cfg.backend, cfg.depth_noise).unwrap();
        let source = src.load_trajectory(1).unwrap();
        let t = source.len() / 2;
        let input = FrameInput {
            rgb: &source.frames[t],
            context: src.manifest().camera(),
            intr: src.manifest().intrinsics(),
            state: Some(&source.states.as_ref().unwrap()[t]),
        };
        let frame = augment_frame(&input, backend.as_ref(), &cfg, 1, t, 1).unwrap();
        let out = dst.load_trajectory(1).unwrap(); // copy 1 lands in slot 0
        assert_eq!(out.frames[t], frame.rgb);
        assert_eq!(out.poses.unwrap()[t], frame.pose.world_from_camera);
    }

    #[test]
    fn report_requires_provenance() {
        let tmp = tempfile::tempdir().unwrap();
        let src = demos(&tmp.path().join("src"), 1, 16);
        assert!(matches!(augment_report(&src), Err(VistaError::MissingProvenance(_))));
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            AugmentConfig { copies: 0, ..Default::default() },
            AugmentConfig { backend: "nerf".into(), ..Default::default() },
            AugmentConfig {
                filter: FilterParams { eta: 0.3, max_tries: 0 },
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn derive_rng_separates_attempts() {
        let a = derive_rng(0, 0, 0, 0, 0).next_u64();
        let b = derive_rng(0, 0, 0, 0, 1).next_u64();
        assert_ne!(a, b);
        assert_eq!(a, derive_rng(0, 0, 0, 0, 0).next_u64());
    }
}
