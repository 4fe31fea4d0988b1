//! Desk-scale tabletop simulator: a reach-and-lift task, a scripted expert,
//! and a ray-casting renderer that produces RGB and planar depth from any
//! camera pose.

mod render;
mod scene;
mod task;

use std::path::Path;

use rayon::prelude::*;

pub use render::{cast_ray, render, Hit, SKY_COLOR};
pub use scene::{Scene, SceneObject, Shape};
pub use task::*;

use crate::dataset::{Dataset, Manifest, Trajectory, FORMAT_VERSION};
use crate::error::Result;
use crate::geometry::{CameraPose, Intrinsics};
use crate::imaging::RgbImage;
use crate::rng::derive_seed;

/// Domain tag separating demonstration resets from evaluation resets.
const DEMO_STREAM: u64 = 0x6465_6d6f;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub third_person_rgb: RgbImage,
    pub wrist_rgb: Option<RgbImage>,
    /// Gripper position (m) followed by the closed flag as 0/1.
    pub proprio: [f64; 4],
}

impl Observation {
    pub fn proprio_of(state: &TaskState) -> [f64; 4] {
        let g = state.gripper_pos;
        [g.x, g.y, g.z, if state.gripper_closed { 1.0 } else { 0.0 }]
    }
}

/// Renders what the robot sees in `state` from the third-person camera `cam`.
pub fn observe(
    state: &TaskState,
    cam: &CameraPose,
    intr: &Intrinsics,
    with_wrist: bool,
) -> Observation {
    let scene = Scene::default_tabletop(state);
    let (rgb, _) = render(&scene, cam, intr);
    let wrist_rgb = with_wrist.then(|| render(&scene, &wrist_pose(state), intr).0);
    Observation {
        third_person_rgb: rgb,
        wrist_rgb,
        proprio: Observation::proprio_of(state),
    }
}

/// Reset seed of demonstration `index` in a run seeded with `seed`.
pub fn demo_reset_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, &[DEMO_STREAM, index as u64])
}

/// Rolls out the expert once and renders every pre-action state.
pub fn record_demo(
    reset_seed: u64,
    cam: &CameraPose,
    intr: &Intrinsics,
    with_wrist: bool,
) -> Trajectory {
    let mut state = reset(reset_seed);
    let mut traj = Trajectory {
        wrist: with_wrist.then(Vec::new),
        states: Some(Vec::new()),
        ..Default::default()
    };
    loop {
        let obs = observe(&state, cam, intr, with_wrist);
        let action = expert_action(&state);
        traj.frames.push(obs.third_person_rgb);
        if let (Some(w), Some(img)) = (traj.wrist.as_mut(), obs.wrist_rgb) {
            w.push(img);
        }
        traj.actions.push(action.to_row());
        traj.states.as_mut().unwrap().push(state);
        let (next, done, _) = step(&state, &action);
        state = next;
        if done {
            return traj;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoConfig {
    pub n: usize,
    pub seed: u64,
    pub camera: CameraPose,
    pub intrinsics: Intrinsics,
    pub wrist: bool,
}

/// Writes `n` expert demonstrations from seeded resets to `out`.
///
/// Trajectories are independent and may be produced on a thread pool; the
/// output does not depend on how many threads run.
pub fn gen_demos(cfg: &DemoConfig, out: &Path, force: bool) -> Result<Dataset> {
    cfg.intrinsics.validate()?;
    if cfg.n == 0 {
        return Err(crate::error::VistaError::InvalidParameter {
            name: "n",
            reason: "at least one demonstration is required".into(),
        });
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        fov_deg: cfg.intrinsics.fov_deg,
        width: cfg.intrinsics.width,
        height: cfg.intrinsics.height,
        camera_world_from_camera: cfg.camera.world_from_camera,
        num_trajectories: cfg.n,
        seed: cfg.seed,
        wrist: cfg.wrist,
        augmentation: None,
    };
    let ds = Dataset::create(out, manifest, force)?;
    (0..cfg.n).into_par_iter().try_for_each(|i| {
        let traj = record_demo(
            demo_reset_seed(cfg.seed, i),
            &cfg.camera,
            &cfg.intrinsics,
            cfg.wrist,
        );
        ds.write_trajectory(i, &traj)
    })?;
    ds.write_manifest()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrist_view_sees_table_below_home() {
        let state = TaskState::default();
        let intr = Intrinsics::default();
        let scene = Scene::default_tabletop(&state);
        let (rgb, depth) = render(&scene, &wrist_pose(&state), &intr);
        let table_rows = (intr.height / 2..intr.height).all(|v| {
            (0..intr.width).all(|u| depth.get(u, v).is_finite())
        });
        assert!(table_rows);
        // Bottom-left corner is bare table, shaded by the overhead light.
        let k = scene.ambient + (1.0 - scene.ambient) * scene.light_dir.z;
        let want = scene::TABLE_ALBEDO.map(|a| (a * k * 255.0).round() as u8);
        assert_eq!(rgb.get_pixel(0, intr.height - 1).0, want);
    }

    #[test]
    fn wrist_view_ignores_third_person_camera() {
        let state = reset(4);
        let intr = Intrinsics::new(45.0, 48, 48).unwrap();
        let a = observe(&state, &default_camera(), &intr, true);
        let other = crate::posesample::look_at(
            nalgebra::Vector3::new(0.3, 0.5, 0.6),
            nalgebra::Vector3::zeros(),
            nalgebra::Vector3::z(),
        )
        .unwrap();
        let b = observe(&state, &other, &intr, true);
        assert_eq!(a.wrist_rgb, b.wrist_rgb);
        assert_ne!(a.third_person_rgb, b.third_person_rgb);
    }

    #[test]
    fn default_camera_sees_workspace() {
        let intr = Intrinsics::default();
        let cam = default_camera();
        let w2c = cam.camera_from_world();
        for p in [
            nalgebra::Vector3::new(0.1, 0.1, 0.0),
            nalgebra::Vector3::new(-0.1, -0.1, 0.0),
            nalgebra::Vector3::new(0.1, -0.1, 0.0),
            nalgebra::Vector3::from(HOME),
            nalgebra::Vector3::new(-0.22, 0.19, 0.04),
            nalgebra::Vector3::new(-0.2, -0.2, 0.06),
        ] {
            let px = crate::geometry::project(&w2c.apply(&p), &intr).unwrap();
            assert!(px.in_frame(&intr), "{p:?} -> {px:?}");
        }
    }
}
