//! Ray-traced ground truth for a unit hemisphere resting on a square plane, lit by an
//! environment map with direct illumination only.

use rayon::prelude::*;

use crate::buffer::{Image, ImageRgb, ImageScalar, Rgb, Vec3};
use crate::envmap::EnvironmentMap;
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;
use crate::shading::{specular_brdf, Material};

const HALF_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Half-width of the orthographic frame, in scene units.
const FRAME_HALF: f64 = 4.0;
const CAMERA_DISTANCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereScene {
    pub resolution: usize,
    pub radius: f64,
    pub plane_half: f64,
    pub albedo: f64,
    pub specular: f64,
    pub roughness: f64,
}

impl Default for SphereScene {
    fn default() -> Self {
        SphereScene {
            resolution: 256,
            radius: 1.0,
            plane_half: 4.0,
            albedo: 1.0,
            specular: 0.5,
            roughness: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Dome,
    Plane,
}

/// First hit of one camera ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub surface: Surface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetComponent {
    Diffuse,
    Specular,
    ShadowedDiffuse,
}

/// All three reference components from one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub diffuse: ImageRgb,
    pub specular: ImageRgb,
    pub shadowed_diffuse: ImageRgb,
}

impl SphereScene {
    pub fn with_resolution(resolution: usize) -> Result<Self> {
        if resolution < 16 {
            return Err(Error::InvalidValue(format!(
                "scene resolution must be at least 16, got {resolution}"
            )));
        }
        Ok(SphereScene {
            resolution,
            ..Default::default()
        })
    }

    /// Camera axes in world coordinates: right, up, and toward the viewer.
    pub fn camera_axes(&self) -> (Vec3, Vec3, Vec3) {
        (
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, HALF_SQRT2, -HALF_SQRT2),
            Vec3::new(0.0, HALF_SQRT2, HALF_SQRT2),
        )
    }

    /// World direction expressed in camera space.
    pub fn to_camera(&self, v: &Vec3) -> Vec3 {
        let (x, y, z) = self.camera_axes();
        Vec3::new(v.dot(&x), v.dot(&y), v.dot(&z))
    }

    pub fn to_camera_matrix(&self) -> nalgebra::Matrix3<f64> {
        let (x, y, z) = self.camera_axes();
        nalgebra::Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
    }

    /// Viewer direction in world coordinates.
    pub fn view(&self) -> Vec3 {
        self.camera_axes().2
    }

    fn material(&self) -> Material {
        Material {
            specular: self.specular,
            roughness: self.roughness,
        }
    }

    /// Orthographic primary ray through the center of pixel `(x, y)`.
    pub fn trace(&self, x: usize, y: usize) -> Option<Hit> {
        let n = self.resolution as f64;
        let (cx, cy, cz) = self.camera_axes();
        let u = ((x as f64 + 0.5) / n * 2.0 - 1.0) * FRAME_HALF;
        let v = (1.0 - (y as f64 + 0.5) / n * 2.0) * FRAME_HALF;
        let origin = cx * u + cy * v + cz * CAMERA_DISTANCE;
        let dir = -cz;
        let mut best: Option<Hit> = None;
        // sphere, upper half only
        let b = origin.dot(&dir);
        let c = origin.norm_squared() - self.radius * self.radius;
        let disc = b * b - c;
        if disc >= 0.0 {
            let t = -b - disc.sqrt();
            let p = origin + dir * t;
            if t > 0.0 && p.y >= 0.0 {
                best = Some(Hit {
                    t,
                    point: p,
                    normal: p / self.radius,
                    surface: Surface::Dome,
                });
            }
        }
        if dir.y < 0.0 {
            let t = -origin.y / dir.y;
            let p = origin + dir * t;
            let inside = p.x.abs() <= self.plane_half && p.z.abs() <= self.plane_half;
            if inside && best.is_none_or(|h| t < h.t) {
                best = Some(Hit {
                    t,
                    point: Vec3::new(p.x, 0.0, p.z),
                    normal: Vec3::y(),
                    surface: Surface::Plane,
                });
            }
        }
        best
    }

    pub fn hits(&self) -> Vec<Option<Hit>> {
        let n = self.resolution;
        (0..n * n)
            .into_par_iter()
            .map(|i| self.trace(i % n, i / n))
            .collect()
    }

    /// 1 if a ray from `hit` toward world direction `dir` escapes, else 0. Directions
    /// below the local horizon count as occluded.
    pub fn visible(&self, hit: &Hit, dir: &Vec3) -> bool {
        if hit.normal.dot(dir) <= 0.0 {
            return false;
        }
        match hit.surface {
            Surface::Plane => {
                let p = hit.point;
                let b = p.dot(dir);
                let c = p.norm_squared() - self.radius * self.radius;
                // under the dome, or the ray meets it on the way out
                !(c <= 0.0 || (b < 0.0 && b * b - c > 0.0))
            }
            Surface::Dome => {
                if dir.y >= 0.0 {
                    return true;
                }
                let t = -hit.point.y / dir.y;
                let q = hit.point + dir * t;
                !(q.x.abs() <= self.plane_half && q.z.abs() <= self.plane_half)
            }
        }
    }
}

/// Camera-space G-buffer of the scene. Depth is the ray distance normalized over the
/// visible surface; its metric span is reported in units of the frame width.
pub fn render_gbuffer(scene: &SphereScene) -> Result<GBuffer> {
    let n = scene.resolution;
    let hits = scene.hits();
    let (t_min, t_max) = hits
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), h| {
            (lo.min(h.t), hi.max(h.t))
        });
    if !t_min.is_finite() {
        return Err(Error::EmptyMask);
    }
    let span = t_max - t_min;
    let depth = Image::from_fn(n, n, |x, y| match &hits[y * n + x] {
        Some(h) => (h.t - t_min) / span,
        None => 1.0,
    });
    let normal = Image::from_fn(n, n, |x, y| match &hits[y * n + x] {
        Some(h) => scene.to_camera(&h.normal).normalize(),
        None => Vec3::z(),
    });
    let mask = Image::from_fn(n, n, |x, y| hits[y * n + x].is_some());
    GBuffer::new(
        depth,
        normal,
        ImageRgb::filled(n, n, Rgb::splat(scene.albedo)),
        ImageScalar::filled(n, n, scene.specular),
        ImageScalar::filled(n, n, scene.roughness),
        mask,
        span / (2.0 * FRAME_HALF),
    )
}

struct Texel {
    dir: Vec3,
    weighted: Rgb,
}

fn env_texels(env: &EnvironmentMap) -> Vec<Texel> {
    let mut out = Vec::with_capacity(env.width() * env.height());
    for y in 0..env.height() {
        let dw = env.texel_solid_angle(y);
        for x in 0..env.width() {
            let e = env.texel(x, y);
            if e.max_channel() > 0.0 {
                out.push(Texel {
                    dir: env.direction(x, y),
                    weighted: e * dw,
                });
            }
        }
    }
    out
}

/// Diffuse `(albedo / pi) E cos`, specular `f E cos`, and diffuse times analytic
/// visibility, summed over every environment texel in row-major order.
pub fn render_targets(scene: &SphereScene, env: &EnvironmentMap) -> Targets {
    let n = scene.resolution;
    let texels = env_texels(env);
    let view = scene.view();
    let mat = scene.material();
    let kd = scene.albedo / std::f64::consts::PI;
    let pixels: Vec<[Rgb; 3]> = scene
        .hits()
        .into_par_iter()
        .map(|hit| {
            let Some(hit) = hit else {
                return [Rgb::ZERO; 3];
            };
            let mut diff = Rgb::ZERO;
            let mut spec = Rgb::ZERO;
            let mut shadowed = Rgb::ZERO;
            for t in &texels {
                let cos = hit.normal.dot(&t.dir);
                if cos <= 0.0 {
                    continue;
                }
                let d = t.weighted * (kd * cos);
                diff += d;
                spec += t.weighted * (specular_brdf(&hit.normal, &t.dir, &view, mat) * cos);
                if scene.visible(&hit, &t.dir) {
                    shadowed += d;
                }
            }
            [diff, spec, shadowed]
        })
        .collect();
    let pick = |k: usize| Image::from_vec(n, n, pixels.iter().map(|p| p[k]).collect()).expect("dims");
    Targets {
        diffuse: pick(0),
        specular: pick(1),
        shadowed_diffuse: pick(2),
    }
}

pub fn render_reference(
    scene: &SphereScene,
    env: &EnvironmentMap,
    component: TargetComponent,
) -> ImageRgb {
    let t = render_targets(scene, env);
    match component {
        TargetComponent::Diffuse => t.diffuse,
        TargetComponent::Specular => t.specular,
        TargetComponent::ShadowedDiffuse => t.shadowed_diffuse,
    }
}

/// Analytic visibility toward world direction `dir` per pixel; 1 outside the mask.
pub fn raycast_visibility(scene: &SphereScene, dir: &Vec3) -> ImageScalar {
    let n = scene.resolution;
    let hits = scene.hits();
    let d = dir.normalize();
    Image::from_fn(n, n, |x, y| match &hits[y * n + x] {
        Some(h) => {
            if scene.visible(h, &d) {
                1.0
            } else {
                0.0
            }
        }
        None => 1.0,
    })
}
