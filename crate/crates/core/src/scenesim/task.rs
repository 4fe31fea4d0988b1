//! Reach-and-lift task with kinematic grasping and a scripted expert.

use serde::{Deserialize, Serialize};

use crate::geometry::{CameraPose, Vec3};
use crate::posesample::look_at;
use crate::rng::{derive_seed, SeededRng};

pub const TABLE_HEIGHT: f64 = 0.0;
pub const CUBE_HALF_SIZE: f64 = 0.025;
/// Half side of the square table region the cube is placed in.
pub const CUBE_REGION_HALF: f64 = 0.1;
pub const GRASP_RADIUS: f64 = 0.03;
pub const MAX_STEP: f64 = 0.02;
pub const HORIZON: u32 = 80;
/// Cube height above the table that counts as lifted.
pub const LIFT_HEIGHT: f64 = 0.1;
/// Height of the expert's pre-grasp waypoint above the cube.
pub const APPROACH_HEIGHT: f64 = 0.08;
pub const HOME: [f64; 3] = [0.0, 0.0, 0.2];
/// Arc center for the quarter-circle distribution.
pub const ROBOT_BASE: [f64; 3] = [0.0, 0.0, 0.0];
/// Distance from the default third-person camera to the robot base.
pub const CAMERA_DISTANCE: f64 = 0.7106;
pub const CAMERA_ELEVATION_DEG: f64 = 40.0;

const WORKSPACE_HALF: f64 = 0.4;
const GRIPPER_MIN_Z: f64 = TABLE_HEIGHT + 0.02;
const GRIPPER_MAX_Z: f64 = 0.45;
const APPROACH_SLOPE: f64 = 3.0;
/// The expert closes once the commanded position is this close to the cube.
const CLOSE_RADIUS: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskState {
    pub cube_pos: Vec3,
    pub gripper_pos: Vec3,
    pub gripper_closed: bool,
    pub attached: bool,
    pub t: u32,
}

impl Default for TaskState {
    fn default() -> Self {
        Self {
            cube_pos: Vec3::new(0.0, 0.0, TABLE_HEIGHT + CUBE_HALF_SIZE),
            gripper_pos: Vec3::from(HOME),
            gripper_closed: false,
            attached: false,
            t: 0,
        }
    }
}

impl TaskState {
    pub fn gripper_cube_distance(&self) -> f64 {
        (self.gripper_pos - self.cube_pos).norm()
    }

    pub fn is_success(&self) -> bool {
        self.cube_pos.z > TABLE_HEIGHT + LIFT_HEIGHT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub delta_gripper: Vec3,
    pub close: bool,
}

impl Action {
    /// Builds an action with each axis of the delta clamped to `±MAX_STEP`.
    pub fn new(delta: Vec3, close: bool) -> Self {
        Self {
            delta_gripper: delta.map(|d| {
                if d.is_nan() {
                    0.0
                } else {
                    d.clamp(-MAX_STEP, MAX_STEP)
                }
            }),
            close,
        }
    }

    pub fn zero() -> Self {
        Self::new(Vec3::zeros(), false)
    }

    /// On-disk row: `[dx, dy, dz, close]` with close as 0 or 1.
    pub fn to_row(&self) -> [f64; 4] {
        let d = self.delta_gripper;
        [d.x, d.y, d.z, if self.close { 1.0 } else { 0.0 }]
    }

    pub fn from_row(row: &[f64; 4]) -> Self {
        Self {
            delta_gripper: Vec3::new(row[0], row[1], row[2]),
            close: row[3] >= 0.5,
        }
    }
}

/// Initial state for a seed: cube uniform in the table region, gripper at home.
pub fn reset(seed: u64) -> TaskState {
    let mut rng = SeededRng::new(derive_seed(seed, &[0x7265_7365_74]));
    let x = rng.uniform_range(-CUBE_REGION_HALF, CUBE_REGION_HALF);
    let y = rng.uniform_range(-CUBE_REGION_HALF, CUBE_REGION_HALF);
    TaskState {
        cube_pos: Vec3::new(x, y, TABLE_HEIGHT + CUBE_HALF_SIZE),
        ..TaskState::default()
    }
}

/// Advances the task by one step. Returns `(next, done, success)`.
pub fn step(state: &TaskState, action: &Action) -> (TaskState, bool, bool) {
    let action = Action::new(action.delta_gripper, action.close);
    let mut next = *state;
    let target = state.gripper_pos + action.delta_gripper;
    next.gripper_pos = Vec3::new(
        target.x.clamp(-WORKSPACE_HALF, WORKSPACE_HALF),
        target.y.clamp(-WORKSPACE_HALF, WORKSPACE_HALF),
        target.z.clamp(GRIPPER_MIN_Z, GRIPPER_MAX_Z),
    );
    let moved = next.gripper_pos - state.gripper_pos;
    next.gripper_closed = action.close;
    if state.attached {
        if action.close {
            next.cube_pos += moved;
        } else {
            next.attached = false;
        }
    } else if action.close && next.gripper_cube_distance() <= GRASP_RADIUS {
        next.attached = true;
    }
    next.t = state.t + 1;
    let success = next.is_success();
    let done = success || next.t >= HORIZON;
    (next, done, success)
}

fn clamp_toward(from: &Vec3, to: &Vec3) -> Vec3 {
    (to - from).map(|d| d.clamp(-MAX_STEP, MAX_STEP))
}

/// Scripted expert: descend along a funnel centred on the cube (hover height
/// proportional to horizontal error, capped at `APPROACH_HEIGHT`), close once
/// within `CLOSE_RADIUS`, then lift.
pub fn expert_action(state: &TaskState) -> Action {
    if state.attached {
        if state.cube_pos.z <= TABLE_HEIGHT + LIFT_HEIGHT + MAX_STEP {
            return Action::new(Vec3::new(0.0, 0.0, MAX_STEP), true);
        }
        return Action::new(Vec3::zeros(), true);
    }
    let g = state.gripper_pos;
    let c = state.cube_pos;
    let exy = (c.xy() - g.xy()).norm();
    let hover = (APPROACH_SLOPE * exy).min(APPROACH_HEIGHT);
    let delta = clamp_toward(&g, &(c + Vec3::new(0.0, 0.0, hover)));
    Action::new(delta, (g + delta - c).norm() <= CLOSE_RADIUS)
}

/// Wrist camera: 5 cm behind (−x) and 5 cm above the gripper, pitched 45°
/// down so its axis passes through the gripper center.
pub fn wrist_pose(state: &TaskState) -> CameraPose {
    let eye = state.gripper_pos + Vec3::new(-0.05, 0.0, 0.05);
    look_at(eye, state.gripper_pos, Vec3::z()).expect("fixed wrist geometry is not degenerate")
}

/// Fixed third-person camera `CAMERA_DISTANCE` from the robot base, on the +x side.
pub fn default_camera() -> CameraPose {
    let el = CAMERA_ELEVATION_DEG.to_radians();
    let base = Vec3::from(ROBOT_BASE);
    let eye = base + Vec3::new(CAMERA_DISTANCE * el.cos(), 0.0, CAMERA_DISTANCE * el.sin());
    look_at(eye, base, Vec3::z()).expect("default camera is not degenerate")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_expert(seed: u64) -> (TaskState, bool, u32) {
        let mut s = reset(seed);
        loop {
            let (next, done, success) = step(&s, &expert_action(&s));
            assert!(!next.attached || (next.gripper_closed && next.gripper_cube_distance() <= GRASP_RADIUS));
            s = next;
            if done {
                return (s, success, s.t);
            }
        }
    }

    #[test]
    fn reset_is_deterministic() {
        assert_eq!(reset(7), reset(7));
        assert_ne!(reset(7).cube_pos, reset(8).cube_pos);
        assert!(!reset(0).attached);
        assert_eq!(reset(0).gripper_pos, Vec3::from(HOME));
    }

    #[test]
    fn zero_action_only_advances_time() {
        let s = reset(3);
        let (next, done, success) = step(&s, &Action::zero());
        assert_eq!(next, TaskState { t: 1, ..s });
        assert!(!done && !success);
    }

    #[test]
    fn release_detaches_and_leaves_cube() {
        let mut s = reset(1);
        s.gripper_pos = s.cube_pos + Vec3::new(0.0, 0.0, 0.05);
        s.cube_pos = s.gripper_pos;
        s.attached = true;
        s.gripper_closed = true;
        let (next, _, _) = step(&s, &Action::new(Vec3::new(0.0, 0.0, 0.01), false));
        assert!(!next.attached && !next.gripper_closed);
        assert_eq!(next.cube_pos, s.cube_pos);
    }

    #[test]
    fn actions_are_clamped() {
        let a = Action::new(Vec3::new(1.0, -1.0, 0.005), true);
        assert_eq!(a.delta_gripper, Vec3::new(MAX_STEP, -MAX_STEP, 0.005));
        assert_eq!(Action::from_row(&a.to_row()), a);
    }

    #[test]
    fn expert_phase_directions() {
        let mut s = reset(5);
        s.gripper_pos = s.cube_pos + Vec3::new(0.1, -0.1, 0.3);
        let a = expert_action(&s);
        let waypoint = s.cube_pos + Vec3::new(0.0, 0.0, APPROACH_HEIGHT);
        let want = waypoint - s.gripper_pos;
        for i in 0..3 {
            assert_eq!(a.delta_gripper[i].signum(), want[i].signum());
        }
        assert!(!a.close);

        s.attached = true;
        s.gripper_closed = true;
        s.gripper_pos = s.cube_pos;
        let a = expert_action(&s);
        assert_eq!(a.delta_gripper, Vec3::new(0.0, 0.0, MAX_STEP));
        assert!(a.close);
    }

    #[test]
    fn expert_succeeds_from_every_seed() {
        for seed in 0..500 {
            let (_, success, t) = run_expert(seed);
            assert!(success, "seed {seed}");
            assert!(t < HORIZON);
        }
    }

    #[test]
    fn horizon_bounds_episodes() {
        let mut s = reset(2);
        let mut steps = 0;
        loop {
            let (next, done, _) = step(&s, &Action::new(Vec3::new(0.0, 0.0, 0.01), false));
            s = next;
            steps += 1;
            if done {
                break;
            }
        }
        assert_eq!(steps, HORIZON);
    }

    #[test]
    fn wrist_pose_moves_rigidly() {
        let a = TaskState::default();
        let mut b = a;
        let d = Vec3::new(0.05, -0.02, 0.03);
        b.gripper_pos += d;
        let (pa, pb) = (wrist_pose(&a), wrist_pose(&b));
        assert!((pb.position() - pa.position() - d).norm() < 1e-12);
        assert!((pa.world_from_camera.rotation() - pb.world_from_camera.rotation()).abs().max() < 1e-12);
        // 45° pitch.
        assert!((pa.forward().z + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn default_camera_distance() {
        let cam = default_camera();
        assert!(((cam.position() - Vec3::from(ROBOT_BASE)).norm() - 0.7106).abs() < 1e-12);
    }
}
