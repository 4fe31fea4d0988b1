use serde::{Deserialize, Serialize};

use super::task::{TaskState, CUBE_HALF_SIZE, TABLE_HEIGHT};
use crate::geometry::{RigidTransform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: Vec3 },
    Sphere { radius: f64 },
    /// Capped cylinder along the local z axis.
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents } => half_extents.norm(),
            Shape::Sphere { radius } => radius,
            Shape::Cylinder {
                radius,
                half_height,
            } => radius.hypot(half_height),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Shape::Box { half_extents } => half_extents.iter().all(|&h| h > 0.0),
            Shape::Sphere { radius } => radius > 0.0,
            Shape::Cylinder {
                radius,
                half_height,
            } => radius > 0.0 && half_height > 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    /// World-from-object transform.
    pub pose: RigidTransform,
    /// Linear RGB reflectance in `[0, 1]`.
    pub albedo: [f64; 3],
}

impl SceneObject {
    fn axis_aligned(shape: Shape, center: Vec3, albedo: [f64; 3]) -> Self {
        Self {
            shape,
            pose: RigidTransform::from_translation(center),
            albedo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    /// Unit vector pointing toward the light.
    pub light_dir: Vec3,
    pub ambient: f64,
    pub table_height: f64,
}

pub const TABLE_ALBEDO: [f64; 3] = [0.62, 0.56, 0.48];
pub const CUBE_ALBEDO: [f64; 3] = [0.92, 0.12, 0.10];
pub const BLUE_BOX_ALBEDO: [f64; 3] = [0.12, 0.22, 0.88];
pub const CYLINDER_ALBEDO: [f64; 3] = [0.12, 0.72, 0.22];
pub const GRIPPER_ALBEDO: [f64; 3] = [0.30, 0.30, 0.33];
pub const MAST_ALBEDO: [f64; 3] = [0.14, 0.14, 0.16];

/// Lateral finger offset from the gripper center.
const FINGER_OFFSET_OPEN: f64 = 0.055;
const FINGER_OFFSET_CLOSED: f64 = CUBE_HALF_SIZE + 0.006;

impl Scene {
    /// The tabletop used throughout: table, red cube, blue box, green
    /// cylinder and the gripper (two fingers, a palm and a mast).
    pub fn default_tabletop(state: &TaskState) -> Scene {
        let mut objects = vec![
            SceneObject::axis_aligned(
                Shape::Box {
                    half_extents: Vec3::new(1.5, 1.5, 0.02),
                },
                Vec3::new(0.0, 0.0, TABLE_HEIGHT - 0.02),
                TABLE_ALBEDO,
            ),
            SceneObject::axis_aligned(
                Shape::Box {
                    half_extents: Vec3::repeat(CUBE_HALF_SIZE),
                },
                state.cube_pos,
                CUBE_ALBEDO,
            ),
            SceneObject::axis_aligned(
                Shape::Box {
                    half_extents: Vec3::new(0.04, 0.04, 0.04),
                },
                Vec3::new(-0.22, 0.19, TABLE_HEIGHT + 0.04),
                BLUE_BOX_ALBEDO,
            ),
            SceneObject::axis_aligned(
                Shape::Cylinder {
                    radius: 0.035,
                    half_height: 0.06,
                },
                Vec3::new(-0.2, -0.2, TABLE_HEIGHT + 0.06),
                CYLINDER_ALBEDO,
            ),
        ];
        objects.extend(gripper_parts(state.gripper_pos, state.gripper_closed));
        Scene {
            objects,
            light_dir: Vec3::new(0.35, 0.25, 1.0).normalize(),
            ambient: 0.35,
            table_height: TABLE_HEIGHT,
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.objects.is_empty()
            && (self.light_dir.norm() - 1.0).abs() < 1e-9
            && (0.0..=1.0).contains(&self.ambient)
            && self.objects.iter().all(|o| o.shape.is_valid())
    }
}

fn gripper_parts(center: Vec3, closed: bool) -> Vec<SceneObject> {
    let offset = if closed {
        FINGER_OFFSET_CLOSED
    } else {
        FINGER_OFFSET_OPEN
    };
    let finger = Shape::Box {
        half_extents: Vec3::new(0.012, 0.006, 0.03),
    };
    vec![
        SceneObject::axis_aligned(finger, center + Vec3::new(0.0, offset, 0.0), GRIPPER_ALBEDO),
        SceneObject::axis_aligned(finger, center - Vec3::new(0.0, offset, 0.0), GRIPPER_ALBEDO),
        SceneObject::axis_aligned(
            Shape::Box {
                half_extents: Vec3::new(0.016, 0.046, 0.009),
            },
            center + Vec3::new(0.0, 0.0, 0.039),
            GRIPPER_ALBEDO,
        ),
        SceneObject::axis_aligned(
            Shape::Cylinder {
                radius: 0.014,
                half_height: 0.15,
            },
            center + Vec3::new(0.0, 0.0, 0.198),
            MAST_ALBEDO,
        ),
    ]
}
