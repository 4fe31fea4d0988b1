//! Rigid transforms and the simplified pinhole camera.
//!
//! Camera frames follow the graphics convention: +x right, +y up and the
//! camera looks down its local −z axis. Extrinsics are stored as
//! world-from-camera transforms. Depth everywhere in this crate is *planar*
//! depth, the distance along the viewing axis, not the length of the ray.

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VistaError};

pub type Vec3 = Vector3<f64>;

/// Orthonormality drift above which a composed rotation is snapped back onto SO(3).
const REORTHONORMALIZE_TRIGGER: f64 = 1e-7;

/// Tolerance accepted when building a transform from external data.
const INPUT_ROTATION_TOLERANCE: f64 = 1e-6;

/// A proper rigid motion `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a transform, checking that `rotation` is a proper rotation.
    ///
    /// Numerical drift up to 1e-6 is accepted. Drift above 1e-7 is projected
    /// back onto the nearest rotation; smaller drift is kept so stored poses
    /// round-trip bit for bit.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|x| x.is_finite()) {
            return Err(VistaError::InvalidTransform("non-finite entry".into()));
        }
        let drift = orthonormality_error(&rotation);
        if drift > INPUT_ROTATION_TOLERANCE {
            return Err(VistaError::InvalidTransform(format!(
                "rotation is not orthonormal (max |RᵀR − I| = {drift:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(VistaError::InvalidTransform(
                "rotation has non-positive determinant".into(),
            ));
        }
        let rotation = if drift > REORTHONORMALIZE_TRIGGER {
            nearest_rotation(&rotation)
        } else {
            rotation
        };
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let rotation = match Unit::try_new(axis, 1e-12) {
            Some(axis) => *Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        Self {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(Vec3::z(), angle)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: the transform mapping `p ↦ self(other(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        if orthonormality_error(&rotation) > REORTHONORMALIZE_TRIGGER {
            rotation = nearest_rotation(&rotation);
        }
        RigidTransform {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major 4×4 homogeneous matrix, the on-disk pose encoding.
    pub fn to_row_major(&self) -> [f64; 16] {
        let m = self.to_matrix4();
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = m[(r, c)];
            }
        }
        out
    }

    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(VistaError::InvalidTransform(format!(
                "expected 16 matrix entries, got {}",
                values.len()
            )));
        }
        let bottom = &values[12..16];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(VistaError::InvalidTransform(
                "last row of a rigid transform must be [0, 0, 0, 1]".into(),
            ));
        }
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8],
            values[9], values[10],
        );
        let translation = Vec3::new(values[3], values[7], values[11]);
        Self::new(rotation, translation)
    }

    pub fn to_matrix4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Largest elementwise difference from `other`, over rotation and translation.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let r = (self.rotation - other.rotation).abs().max();
        let t = (self.translation - other.translation).abs().max();
        r.max(t)
    }

    /// Rotation angle of the rotational part, in radians.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        RigidTransform::from_row_major(&values).map_err(serde::de::Error::custom)
    }
}

/// `max |RᵀR − I|` over all entries.
pub fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Closest rotation in the Frobenius sense (polar factor of `m`).
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        r = u * v_t;
    }
    r
}

/// Camera extrinsics, stored as the world-from-camera transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct CameraPose {
    pub world_from_camera: RigidTransform,
}

impl CameraPose {
    pub fn new(world_from_camera: RigidTransform) -> Self {
        Self { world_from_camera }
    }

    pub fn position(&self) -> Vec3 {
        *self.world_from_camera.translation()
    }

    pub fn camera_from_world(&self) -> RigidTransform {
        self.world_from_camera.inverse()
    }

    /// Unit viewing direction (camera −z) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        -self.world_from_camera.rotation().column(2).into_owned()
    }

    pub fn up(&self) -> Vec3 {
        self.world_from_camera.rotation().column(1).into_owned()
    }

    pub fn right(&self) -> Vec3 {
        self.world_from_camera.rotation().column(0).into_owned()
    }
}

/// Transform taking points in the context camera frame to the target camera frame.
///
/// View-synthesis backends only ever see this relative transform.
pub fn relative_pose(context: &CameraPose, target: &CameraPose) -> RigidTransform {
    target
        .world_from_camera
        .inverse()
        .compose(&context.world_from_camera)
}

/// Pinhole intrinsics reduced to a vertical field of view with the principal
/// point at the image center and square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self {
            fov_deg: 45.0,
            width: 256,
            height: 256,
        }
    }
}

impl Intrinsics {
    pub fn new(fov_deg: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fov_deg,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(VistaError::InvalidIntrinsics(format!(
                "fov_deg must lie in (0, 180), got {}",
                self.fov_deg
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(VistaError::InvalidIntrinsics(format!(
                "image size must be at least 1×1, got {}×{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        (self.height as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    pub fn cx(&self) -> f64 {
        self.width as f64 / 2.0
    }

    pub fn cy(&self) -> f64 {
        self.height as f64 / 2.0
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Camera-frame direction through `px` scaled to unit planar depth
    /// (its z component is exactly −1).
    pub fn ray_direction(&self, px: Pixel) -> Vec3 {
        let f = self.focal_px();
        Vec3::new((px.u - self.cx()) / f, -(px.v - self.cy()) / f, -1.0)
    }
}

/// Continuous image coordinates. Pixel `(i, j)` has its center at `u = i, v = j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn in_frame(&self, intr: &Intrinsics) -> bool {
        self.u >= 0.0 && self.v >= 0.0 && self.u < intr.width as f64 && self.v < intr.height as f64
    }
}

/// Projects a camera-frame point. Points must lie strictly in front of the camera.
pub fn project(point_camera: &Vec3, intr: &Intrinsics) -> Result<Pixel> {
    let z = point_camera.z;
    if z >= -1e-9 {
        return Err(VistaError::BehindCamera { z });
    }
    let f = intr.focal_px();
    let depth = -z;
    Ok(Pixel {
        u: f * (point_camera.x / depth) + intr.cx(),
        v: -f * (point_camera.y / depth) + intr.cy(),
    })
}

/// Lifts a pixel at the given planar depth back to a camera-frame point.
pub fn deproject(px: Pixel, depth: f64, intr: &Intrinsics) -> Result<Vec3> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(VistaError::InvalidDepth(depth));
    }
    Ok(intr.ray_direction(px) * depth)
}
