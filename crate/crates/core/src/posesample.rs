//! Camera viewpoint distributions used for augmentation and for testing.
//!
//! * `perturbation`: small random translation in world coordinates plus a
//!   rotation about a uniformly random axis, applied in the camera frame.
//! * `arc`: positions on a sphere around the robot base at the starting
//!   camera height, within an azimuth span of the starting viewpoint, aimed
//!   back at the base.
//! * `perturbation_wide`: the perturbation family with the wide parameters
//!   used when the test viewpoints are unknown.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VistaError};
use crate::geometry::{CameraPose, RigidTransform, Vec3};
use crate::rng::SeededRng;

pub const PERTURB_SIGMA_T: f64 = 0.03;
pub const PERTURB_SIGMA_R: f64 = 0.075;
pub const WIDE_SIGMA_T: f64 = 0.15;
pub const WIDE_SIGMA_R: f64 = 0.375;
pub const ARC_SPAN_DEG: f64 = 90.0;
pub const ARC_SIGMA_RADIUS: f64 = 0.05;

const ARC_MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationParams {
    /// Standard deviation of each translation axis, meters.
    pub sigma_t: f64,
    /// Standard deviation of the rotation angle, radians.
    pub sigma_r: f64,
}

impl PerturbationParams {
    pub fn standard() -> Self {
        Self {
            sigma_t: PERTURB_SIGMA_T,
            sigma_r: PERTURB_SIGMA_R,
        }
    }

    pub fn wide() -> Self {
        Self {
            sigma_t: WIDE_SIGMA_T,
            sigma_r: WIDE_SIGMA_R,
        }
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("sigma_t", self.sigma_t)?;
        non_negative("sigma_r", self.sigma_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcParams {
    /// Sphere center (the robot base), meters.
    pub center: [f64; 3],
    /// Total azimuth span in degrees; offsets are drawn from ±span/2.
    pub azimuth_span_deg: f64,
    /// Standard deviation of the sphere radius, meters.
    pub sigma_radius: f64,
}

impl ArcParams {
    pub fn quarter_circle(center: Vec3) -> Self {
        Self {
            center: [center.x, center.y, center.z],
            azimuth_span_deg: ARC_SPAN_DEG,
            sigma_radius: ARC_SIGMA_RADIUS,
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from(self.center)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.azimuth_span_deg >= 0.0 && self.azimuth_span_deg <= 360.0) {
            return Err(VistaError::InvalidParameter {
                name: "azimuth_span_deg",
                reason: format!("must lie in [0, 360], got {}", self.azimuth_span_deg),
            });
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(VistaError::InvalidParameter {
                name: "center",
                reason: "must be finite".into(),
            });
        }
        non_negative("sigma_radius", self.sigma_radius)
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(VistaError::InvalidParameter {
            name,
            reason: format!("must be finite and non-negative, got {v}"),
        })
    }
}

/// A distribution over camera extrinsics, as written in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViewDistribution {
    /// Always the starting camera.
    Original,
    Perturbation(PerturbationParams),
    PerturbationWide(PerturbationParams),
    Arc(ArcParams),
}

impl ViewDistribution {
    pub fn perturbation() -> Self {
        ViewDistribution::Perturbation(PerturbationParams::standard())
    }

    pub fn perturbation_wide() -> Self {
        ViewDistribution::PerturbationWide(PerturbationParams::wide())
    }

    pub fn arc(center: Vec3) -> Self {
        ViewDistribution::Arc(ArcParams::quarter_circle(center))
    }

    /// Parses the short names accepted on the command line.
    pub fn from_name(name: &str, arc_center: Vec3) -> Option<Self> {
        match name {
            "original" => Some(ViewDistribution::Original),
            "perturb" | "perturbation" => Some(Self::perturbation()),
            "perturb_wide" | "perturbation_wide" => Some(Self::perturbation_wide()),
            "arc" => Some(Self::arc(arc_center)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViewDistribution::Original => "original",
            ViewDistribution::Perturbation(_) => "perturbation",
            ViewDistribution::PerturbationWide(_) => "perturbation_wide",
            ViewDistribution::Arc(_) => "arc",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ViewDistribution::Original => Ok(()),
            ViewDistribution::Perturbation(p) | ViewDistribution::PerturbationWide(p) => {
                p.validate()
            }
            ViewDistribution::Arc(a) => a.validate(),
        }
    }

    pub fn sample(&self, initial: &CameraPose, rng: &mut SeededRng) -> Result<CameraPose> {
        match self {
            ViewDistribution::Original => Ok(*initial),
            ViewDistribution::Perturbation(p) | ViewDistribution::PerturbationWide(p) => {
                Ok(sample_perturbation(initial, p, rng))
            }
            ViewDistribution::Arc(a) => sample_arc(initial, a, rng),
        }
    }
}

/// Jitters a camera: `t' = t + Δt` in world coordinates, `R' = R·Rot(û, θ)`.
pub fn sample_perturbation(
    pose: &CameraPose,
    params: &PerturbationParams,
    rng: &mut SeededRng,
) -> CameraPose {
    // Draw order is fixed: three translation normals, axis, angle.
    let delta = Vec3::new(
        rng.normal(0.0, params.sigma_t),
        rng.normal(0.0, params.sigma_t),
        rng.normal(0.0, params.sigma_t),
    );
    let axis = rng.unit_vector();
    let angle = rng.normal(0.0, params.sigma_r);
    if params.sigma_t == 0.0 && params.sigma_r == 0.0 {
        return *pose;
    }
    let w = &pose.world_from_camera;
    let rotated = w.compose(&RigidTransform::from_axis_angle(axis, angle));
    let moved = RigidTransform::new(*rotated.rotation(), w.translation() + delta)
        .expect("composition of rotations is a rotation");
    CameraPose::new(moved)
}

/// Samples a camera on the horizontal circle through the initial camera of a
/// sphere centered at `params.center`, with a noisy radius, aimed at the center.
pub fn sample_arc(
    initial: &CameraPose,
    params: &ArcParams,
    rng: &mut SeededRng,
) -> Result<CameraPose> {
    let center = params.center();
    let offset = initial.position() - center;
    let horizontal = offset.x.hypot(offset.y);
    if horizontal < 1e-6 {
        return Err(VistaError::DegenerateGeometry(
            "initial camera lies on the vertical axis through the arc center".into(),
        ));
    }
    let dz = offset.z;
    let r0 = offset.norm();
    let mut radius = None;
    for _ in 0..ARC_MAX_RESAMPLES {
        let r = r0 + rng.normal(0.0, params.sigma_radius);
        if r * r >= dz * dz && r > 0.0 {
            radius = Some(r);
            break;
        }
    }
    let radius = radius.ok_or_else(|| {
        VistaError::SamplingFailed(format!(
            "no radius with r² ≥ Δz² after {ARC_MAX_RESAMPLES} draws"
        ))
    })?;
    let half_span = params.azimuth_span_deg.to_radians() / 2.0;
    let azimuth = offset.y.atan2(offset.x) + rng.uniform_range(-half_span, half_span);
    let rho = (radius * radius - dz * dz).sqrt();
    let eye = Vec3::new(
        center.x + rho * azimuth.cos(),
        center.y + rho * azimuth.sin(),
        initial.position().z,
    );
    look_at(eye, center, Vec3::z())
}

/// Camera at `eye` looking at `target`, rolled so its +y axis leans toward `up`.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<CameraPose> {
    let forward = target - eye;
    let dist = forward.norm();
    if dist < 1e-12 {
        return Err(VistaError::DegenerateGeometry(
            "look-at eye coincides with target".into(),
        ));
    }
    let forward = forward / dist;
    let right = forward.cross(&up);
    let right_norm = right.norm();
    if right_norm < 1e-9 * up.norm().max(1e-300) || up.norm() < 1e-12 {
        return Err(VistaError::DegenerateGeometry(
            "look-at up vector is parallel to the viewing direction".into(),
        ));
    }
    let right = right / right_norm;
    let cam_up = right.cross(&forward);
    let rotation = nalgebra::Matrix3::from_columns(&[right, cam_up, -forward]);
    Ok(CameraPose::new(RigidTransform::new(rotation, eye)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, Intrinsics};

    fn lift_camera() -> CameraPose {
        let el = 40f64.to_radians();
        let eye = Vec3::new(0.7106 * el.cos(), 0.0, 0.7106 * el.sin());
        look_at(eye, Vec3::zeros(), Vec3::z()).unwrap()
    }

    #[test]
    fn zero_sigma_perturbation_is_identity() {
        let pose = lift_camera();
        let p = PerturbationParams {
            sigma_t: 0.0,
            sigma_r: 0.0,
        };
        let mut rng = SeededRng::new(1);
        for _ in 0..10 {
            assert_eq!(sample_perturbation(&pose, &p, &mut rng), pose);
        }
    }

    #[test]
    fn perturbation_is_deterministic() {
        let pose = lift_camera();
        let a = sample_perturbation(&pose, &PerturbationParams::standard(), &mut SeededRng::new(9));
        let b = sample_perturbation(&pose, &PerturbationParams::standard(), &mut SeededRng::new(9));
        assert_eq!(a, b);
    }

    #[test]
    fn look_at_from_negative_y() {
        let cam = look_at(Vec3::new(0.0, -1.0, 0.0), Vec3::zeros(), Vec3::z()).unwrap();
        assert!((cam.forward() - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
        assert!(cam.up().dot(&Vec3::z()) > 0.0);
    }

    #[test]
    fn look_at_target_projects_to_center() {
        let intr = Intrinsics::default();
        let target = Vec3::new(0.1, -0.2, 0.05);
        let cam = look_at(Vec3::new(0.6, 0.3, 0.5), target, Vec3::z()).unwrap();
        let px = project(&cam.camera_from_world().apply(&target), &intr).unwrap();
        assert!((px.u - 128.0).abs() < 1e-9 && (px.v - 128.0).abs() < 1e-9);
    }

    #[test]
    fn look_at_full_turn_returns_to_start() {
        let target = Vec3::new(0.0, 0.0, 0.0);
        let eye = Vec3::new(0.5, 0.2, 0.4);
        let start = look_at(eye, target, Vec3::z()).unwrap();
        let turned_eye = RigidTransform::rot_z(std::f64::consts::TAU).apply(&eye);
        let end = look_at(turned_eye, target, Vec3::z()).unwrap();
        assert!(start
            .world_from_camera
            .max_abs_diff(&end.world_from_camera)
            < 1e-9);
    }

    #[test]
    fn look_at_degenerate_inputs() {
        assert!(look_at(Vec3::zeros(), Vec3::zeros(), Vec3::z()).is_err());
        assert!(look_at(Vec3::new(0.0, 0.0, 1.0), Vec3::zeros(), Vec3::z()).is_err());
    }

    #[test]
    fn zero_span_arc_keeps_position_and_reaims() {
        let el = 30f64.to_radians();
        let eye = Vec3::new(0.6 * el.cos(), 0.0, 0.6 * el.sin());
        // Start looking somewhere other than the center.
        let initial = look_at(eye, Vec3::new(0.0, 0.2, 0.0), Vec3::z()).unwrap();
        let params = ArcParams {
            center: [0.0; 3],
            azimuth_span_deg: 0.0,
            sigma_radius: 0.0,
        };
        let got = sample_arc(&initial, &params, &mut SeededRng::new(0)).unwrap();
        assert!((got.position() - eye).norm() < 1e-12);
        let aimed = look_at(eye, Vec3::zeros(), Vec3::z()).unwrap();
        assert!(got.world_from_camera.max_abs_diff(&aimed.world_from_camera) < 1e-12);
    }

    #[test]
    fn arc_rejects_camera_above_center() {
        let initial = CameraPose::new(RigidTransform::from_translation(Vec3::new(0.0, 0.0, 1.0)));
        let err = sample_arc(
            &initial,
            &ArcParams::quarter_circle(Vec3::zeros()),
            &mut SeededRng::new(0),
        );
        assert!(matches!(err, Err(VistaError::DegenerateGeometry(_))));
    }

    #[test]
    fn distribution_config_round_trip() {
        let json = r#"{"kind":"arc","center":[0.0,0.0,0.0],"azimuth_span_deg":90,"sigma_radius":0.05}"#;
        let d: ViewDistribution = serde_json::from_str(json).unwrap();
        assert_eq!(d, ViewDistribution::arc(Vec3::zeros()));
        let p: ViewDistribution =
            serde_json::from_str(r#"{"kind":"perturbation","sigma_t":0.03,"sigma_r":0.075}"#)
                .unwrap();
        assert_eq!(p, ViewDistribution::perturbation());
        let w: ViewDistribution =
            serde_json::from_str(r#"{"kind":"perturbation_wide","sigma_t":0.15,"sigma_r":0.375}"#)
                .unwrap();
        assert_eq!(w, ViewDistribution::perturbation_wide());
        assert!(serde_json::from_str::<ViewDistribution>(
            r#"{"kind":"perturbation","sigma_t":0.03,"sigma_r":0.075,"extra":1}"#
        )
        .is_err());
    }
}
