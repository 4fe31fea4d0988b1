//! Novel-view synthesis backends.
//!
//! A backend receives the context image, the field of view and the pose of
//! the target camera *relative to* the context camera, and returns an image
//! of the same scene seen from the target camera. Two implementations ship
//! here: geometric reprojection of an RGB-D frame (optionally with emulated
//! depth-estimation noise) and an oracle that re-renders the simulator scene.

mod depth_noise;
mod inpaint;
mod splat;

use crate::error::{Result, VistaError};
use crate::geometry::{deproject, CameraPose, Intrinsics, Pixel, RigidTransform};
use crate::imaging::{DepthMap, Mask, RgbImage};
use crate::rng::SeededRng;
use crate::scenesim::{render, Scene};

pub use depth_noise::{perturb_depth, DepthNoise};
pub use inpaint::{inpaint_pullpush, NEUTRAL_GREY};
pub use splat::{
    splat_points, SplatOutput, ZBuffer, DEFAULT_POINTS_PER_PIXEL, DEFAULT_RADIUS_NDC,
};

/// Simulator state captured at the context frame; only the oracle reads it.
#[derive(Debug, Clone)]
pub struct FrozenScene {
    pub scene: Scene,
    pub context: CameraPose,
}

#[derive(Debug, Clone, Copy)]
pub struct NvsRequest<'a> {
    pub rgb: &'a RgbImage,
    pub depth: Option<&'a DepthMap>,
    pub intr: Intrinsics,
    /// Target-from-context transform.
    pub relative: RigidTransform,
    pub scene: Option<&'a FrozenScene>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthResult {
    pub rgb: RgbImage,
    /// True where the color came from scene geometry rather than inpainting.
    pub valid_mask: Mask,
}

pub trait NvsBackend: Send + Sync {
    /// Identifier written to dataset manifests.
    fn id(&self) -> &'static str;

    /// Whether `synthesize` reads `NvsRequest::depth`.
    fn needs_depth(&self) -> bool;

    fn synthesize(&self, req: &NvsRequest<'_>, rng: &mut SeededRng) -> Result<SynthResult>;
}

/// Re-renders the frozen simulator scene from the target camera.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl NvsBackend for OracleBackend {
    fn id(&self) -> &'static str {
        "oracle"
    }

    fn needs_depth(&self) -> bool {
        false
    }

    fn synthesize(&self, req: &NvsRequest<'_>, _rng: &mut SeededRng) -> Result<SynthResult> {
        synthesize_oracle(req)
    }
}

/// Depth reprojection: deproject, transform, splat, inpaint.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReprojectBackend {
    /// When set, the depth map is corrupted before use, emulating an estimator.
    pub depth_noise: Option<DepthNoise>,
}

impl NvsBackend for ReprojectBackend {
    fn id(&self) -> &'static str {
        if self.depth_noise.is_some() {
            "reproject_noisydepth"
        } else {
            "reproject"
        }
    }

    fn needs_depth(&self) -> bool {
        true
    }

    fn synthesize(&self, req: &NvsRequest<'_>, rng: &mut SeededRng) -> Result<SynthResult> {
        match self.depth_noise {
            None => synthesize_reproject(req),
            Some(noise) => {
                let depth = req.depth.ok_or(VistaError::MissingDepth)?;
                let noisy = perturb_depth(depth, rng, &noise);
                synthesize_reproject(&NvsRequest {
                    depth: Some(&noisy),
                    ..*req
                })
            }
        }
    }
}

/// Looks up a backend by its config name.
pub fn backend_from_id(id: &str, depth_noise: DepthNoise) -> Result<Box<dyn NvsBackend>> {
    match id {
        "oracle" => Ok(Box::new(OracleBackend)),
        "reproject" => Ok(Box::new(ReprojectBackend { depth_noise: None })),
        "reproject_noisydepth" => Ok(Box::new(ReprojectBackend {
            depth_noise: Some(depth_noise),
        })),
        other => Err(VistaError::UnknownBackend(other.to_string())),
    }
}

const IDENTITY_TOLERANCE: f64 = 1e-12;

pub const BACKEND_IDS: [&str; 3] = ["oracle", "reproject", "reproject_noisydepth"];

pub fn synthesize_reproject(req: &NvsRequest<'_>) -> Result<SynthResult> {
    let depth = req.depth.ok_or(VistaError::MissingDepth)?;
    let (w, h) = req.rgb.dimensions();
    if depth.dimensions() != (w, h) {
        return Err(VistaError::DimensionMismatch {
            a: (w, h),
            b: depth.dimensions(),
        });
    }
    if (req.intr.width, req.intr.height) != (w, h) {
        return Err(VistaError::DimensionMismatch {
            a: (w, h),
            b: (req.intr.width, req.intr.height),
        });
    }
    let mut points = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if !(d.is_finite() && d > 0.0) {
                continue;
            }
            let p = deproject(Pixel::new(x as f64, y as f64), d, &req.intr)?;
            points.push((req.relative.apply(&p), req.rgb.get_pixel(x, y).0));
        }
    }
    let splat = splat_points(
        &points,
        &req.intr,
        DEFAULT_RADIUS_NDC,
        DEFAULT_POINTS_PER_PIXEL,
    );
    let rgb = inpaint_pullpush(&splat.rgb, &splat.valid);
    Ok(SynthResult {
        rgb,
        valid_mask: splat.valid,
    })
}

pub fn synthesize_oracle(req: &NvsRequest<'_>) -> Result<SynthResult> {
    let frozen = req.scene.ok_or(VistaError::OracleUnavailable)?;
    // A relative pose within rounding of identity renders the context view exactly.
    let target = if req.relative.max_abs_diff(&RigidTransform::identity()) < IDENTITY_TOLERANCE {
        frozen.context
    } else {
        CameraPose::new(
            frozen
                .context
                .world_from_camera
                .compose(&req.relative.inverse()),
        )
    };
    let (rgb, _) = render(&frozen.scene, &target, &req.intr);
    Ok(SynthResult {
        rgb,
        valid_mask: Mask::new(req.intr.width, req.intr.height, true),
    })
}
