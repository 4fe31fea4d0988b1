//! Ray-cast renderer for scenes built from analytic primitives.

use image::Rgb;

use super::scene::{Scene, SceneObject, Shape};
use crate::geometry::{CameraPose, Intrinsics, Pixel, RigidTransform, Vec3};
use crate::imaging::{DepthMap, RgbImage};

/// Color of rays that hit nothing.
pub const SKY_COLOR: [f64; 3] = [0.62, 0.74, 0.86];

const MIN_HIT_DEPTH: f64 = 1e-9;

/// A surface hit in world coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Planar depth along the camera axis.
    pub depth: f64,
    pub normal: Vec3,
    pub object: usize,
}

struct Prepared<'a> {
    object: &'a SceneObject,
    object_from_world: RigidTransform,
    /// Inclusive pixel bounds `(u0, v0, u1, v1)` that can contain the object.
    bounds: (i64, i64, i64, i64),
}

/// Renders color and planar depth. Pure: equal inputs give bit-identical outputs.
pub fn render(scene: &Scene, cam: &CameraPose, intr: &Intrinsics) -> (RgbImage, DepthMap) {
    let (w, h) = (intr.width, intr.height);
    let camera_from_world = cam.camera_from_world();
    let prepared: Vec<Prepared> = scene
        .objects
        .iter()
        .map(|object| Prepared {
            object,
            object_from_world: object.pose.inverse(),
            bounds: screen_bounds(object, &camera_from_world, intr),
        })
        .collect();

    let origin = cam.position();
    let rot = *cam.world_from_camera.rotation();
    let mut rgb = RgbImage::new(w, h);
    let mut depth = DepthMap::new(w, h, f64::INFINITY);
    let mut candidates: Vec<&Prepared> = Vec::with_capacity(prepared.len());
    for v in 0..h {
        let row_objects: Vec<&Prepared> = prepared
            .iter()
            .filter(|p| p.bounds.1 <= v as i64 && v as i64 <= p.bounds.3)
            .collect();
        for u in 0..w {
            candidates.clear();
            candidates.extend(
                row_objects
                    .iter()
                    .filter(|p| p.bounds.0 <= u as i64 && u as i64 <= p.bounds.2),
            );
            let dir = rot * intr.ray_direction(Pixel::new(u as f64, v as f64));
            let hit = candidates
                .iter()
                .enumerate()
                .filter_map(|(i, p)| {
                    intersect_local(p, &origin, &dir).map(|(t, n)| (t, n, i))
                })
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let color = match hit {
                Some((t, normal, i)) => {
                    depth.set(u, v, t);
                    shade(scene, candidates[i].object, &normal)
                }
                None => SKY_COLOR,
            };
            rgb.put_pixel(u, v, to_rgb8(color));
        }
    }
    (rgb, depth)
}

/// Casts a single world-space ray `origin + t·dir` and returns the nearest hit.
///
/// `t` is returned in units of `dir`; callers that pass a direction with unit
/// camera-axis component get planar depth back.
pub fn cast_ray(scene: &Scene, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
    scene
        .objects
        .iter()
        .enumerate()
        .filter_map(|(i, object)| {
            let prepared = Prepared {
                object,
                object_from_world: object.pose.inverse(),
                bounds: (i64::MIN, i64::MIN, i64::MAX, i64::MAX),
            };
            intersect_local(&prepared, origin, dir).map(|(t, normal)| Hit {
                depth: t,
                normal,
                object: i,
            })
        })
        .min_by(|a, b| a.depth.total_cmp(&b.depth))
}

fn shade(scene: &Scene, object: &SceneObject, normal: &Vec3) -> [f64; 3] {
    let lambert = normal.dot(&scene.light_dir).max(0.0);
    let k = scene.ambient + (1.0 - scene.ambient) * lambert;
    object.albedo.map(|a| a * k)
}

fn to_rgb8(c: [f64; 3]) -> Rgb<u8> {
    Rgb(c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8))
}

fn intersect_local(p: &Prepared, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
    let o = p.object_from_world.apply(origin);
    let d = p.object_from_world.apply_vector(dir);
    let (t, n_local) = match p.object.shape {
        Shape::Box { half_extents } => intersect_box(&o, &d, &half_extents)?,
        Shape::Sphere { radius } => intersect_sphere(&o, &d, radius)?,
        Shape::Cylinder {
            radius,
            half_height,
        } => intersect_cylinder(&o, &d, radius, half_height)?,
    };
    Some((t, p.object.pose.apply_vector(&n_local)))
}

fn intersect_box(o: &Vec3, d: &Vec3, half: &Vec3) -> Option<(f64, Vec3)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0;
    let mut far_axis = 0;
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a].abs() > half[a] {
                return None;
            }
            continue;
        }
        let t1 = (-half[a] - o[a]) / d[a];
        let t2 = (half[a] - o[a]) / d[a];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_near {
            t_near = lo;
            near_axis = a;
        }
        if hi < t_far {
            t_far = hi;
            far_axis = a;
        }
    }
    if t_near > t_far || t_far <= MIN_HIT_DEPTH {
        return None;
    }
    let (t, axis) = if t_near > MIN_HIT_DEPTH {
        (t_near, near_axis)
    } else {
        (t_far, far_axis)
    };
    let p = o + d * t;
    let mut n = Vec3::zeros();
    n[axis] = p[axis].signum();
    Some((t, n))
}

fn intersect_sphere(o: &Vec3, d: &Vec3, r: f64) -> Option<(f64, Vec3)> {
    let a = d.dot(d);
    let b = 2.0 * o.dot(d);
    let c = o.dot(o) - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Numerically stable root pair.
    let q = if b >= 0.0 { -0.5 * (b + sq) } else { -0.5 * (b - sq) };
    let (mut t0, mut t1) = (q / a, c / q);
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let t = if t0 > MIN_HIT_DEPTH {
        t0
    } else if t1 > MIN_HIT_DEPTH {
        t1
    } else {
        return None;
    };
    Some((t, (o + d * t) / r))
}

fn intersect_cylinder(o: &Vec3, d: &Vec3, r: f64, hh: f64) -> Option<(f64, Vec3)> {
    let mut best: Option<(f64, Vec3)> = None;
    let mut consider = |t: f64, n: Vec3| {
        if t > MIN_HIT_DEPTH && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, n));
        }
    };
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-18 {
        let b = 2.0 * (o.x * d.x + o.y * d.y);
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                let p = o + d * t;
                if p.z.abs() <= hh {
                    consider(t, Vec3::new(p.x / r, p.y / r, 0.0));
                }
            }
        }
    }
    if d.z.abs() > 1e-15 {
        for cap in [-hh, hh] {
            let t = (cap - o.z) / d.z;
            let p = o + d * t;
            if p.x * p.x + p.y * p.y <= r * r {
                consider(t, Vec3::new(0.0, 0.0, cap.signum()));
            }
        }
    }
    best
}

/// Conservative pixel rectangle covering the object's bounding sphere.
fn screen_bounds(
    object: &SceneObject,
    camera_from_world: &RigidTransform,
    intr: &Intrinsics,
) -> (i64, i64, i64, i64) {
    let full = (0, 0, intr.width as i64 - 1, intr.height as i64 - 1);
    let c = camera_from_world.apply(object.pose.translation());
    let rho = object.shape.bounding_radius();
    let near = -c.z - rho;
    if near < 1e-3 {
        return full;
    }
    let far = -c.z + rho;
    let f = intr.focal_px();
    let extent = |center: f64| {
        let vals = [
            (center - rho) / near,
            (center - rho) / far,
            (center + rho) / near,
            (center + rho) / far,
        ];
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (xl, xh) = extent(c.x);
    let (yl, yh) = extent(c.y);
    let u0 = (f * xl + intr.cx()).floor() as i64 - 1;
    let u1 = (f * xh + intr.cx()).ceil() as i64 + 1;
    let v0 = (-f * yh + intr.cy()).floor() as i64 - 1;
    let v1 = (-f * yl + intr.cy()).ceil() as i64 + 1;
    (
        u0.max(full.0),
        v0.max(full.1),
        u1.min(full.2),
        v1.min(full.3),
    )
}
