//! Area lights: intensity, direction and a Gaussian blur width standing in for area.

use serde::{Deserialize, Serialize};

use crate::buffer::{normalize, ImageRgb, Rgb, Vec3};
use crate::envmap::{dir_to_equirect, EnvironmentMap};
use crate::error::{Error, Result};

/// Bounds on `sigma`, in pixels of a 256x256 shadow map.
pub const SIGMA_MIN: f64 = 0.5;
pub const SIGMA_MAX: f64 = 40.0;
pub const DEFAULT_SIGMA: f64 = 10.0;

const DIRECTION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaLight {
    pub intensity: Rgb,
    /// Unit vector from the scene toward the light.
    pub direction: Vec3,
    pub sigma: f64,
}

impl AreaLight {
    pub fn new(intensity: Rgb, direction: Vec3, sigma: f64) -> Result<Self> {
        let light = AreaLight {
            intensity,
            direction,
            sigma,
        };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.intensity.is_finite() || self.intensity.0.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidLight(format!(
                "intensity must be finite and non-negative, got {:?}",
                self.intensity.0
            )));
        }
        let n = self.direction.norm();
        if !n.is_finite() || (n - 1.0).abs() > DIRECTION_TOLERANCE {
            return Err(Error::InvalidLight(format!(
                "direction must be a unit vector, got length {n}"
            )));
        }
        if !(SIGMA_MIN..=SIGMA_MAX).contains(&self.sigma) {
            return Err(Error::InvalidLight(format!(
                "sigma {} outside [{SIGMA_MIN}, {SIGMA_MAX}]",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LightSet {
    lights: Vec<AreaLight>,
}

impl LightSet {
    pub fn new(lights: Vec<AreaLight>) -> Result<Self> {
        if lights.is_empty() {
            return Err(Error::InvalidLight("light set is empty".into()));
        }
        for (i, l) in lights.iter().enumerate() {
            l.validate()
                .map_err(|e| Error::InvalidLight(format!("light {i}: {e}")))?;
        }
        Ok(LightSet { lights })
    }

    pub fn lights(&self) -> &[AreaLight] {
        &self.lights
    }

    pub fn n_lights(&self) -> usize {
        self.lights.len()
    }

    /// The same lights with every direction mapped through `rot`.
    pub fn rotated(&self, rot: &nalgebra::Matrix3<f64>) -> LightSet {
        let lights = self
            .lights
            .iter()
            .map(|l| AreaLight {
                direction: (rot * l.direction).normalize(),
                ..*l
            })
            .collect();
        LightSet { lights }
    }

    pub fn to_json(&self) -> String {
        let file = LightFile {
            n_lights: self.lights.len(),
            lights: self
                .lights
                .iter()
                .map(|l| LightRecord {
                    intensity: l.intensity.0,
                    direction: [l.direction.x, l.direction.y, l.direction.z],
                    sigma: l.sigma,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("light file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LightFile =
            serde_json::from_str(text).map_err(|e| Error::MalformedLights(e.to_string()))?;
        if file.n_lights != file.lights.len() {
            return Err(Error::MalformedLights(format!(
                "n_lights is {} but {} lights are listed",
                file.n_lights,
                file.lights.len()
            )));
        }
        let lights = file
            .lights
            .into_iter()
            .map(|r| AreaLight {
                intensity: Rgb(r.intensity),
                direction: Vec3::new(r.direction[0], r.direction[1], r.direction[2]),
                sigma: r.sigma,
            })
            .collect();
        LightSet::new(lights)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// On-disk light-set schema.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightFile {
    n_lights: usize,
    lights: Vec<LightRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightRecord {
    intensity: [f64; 3],
    direction: [f64; 3],
    sigma: f64,
}

/// Default initial intensity: mean environment radiance times `2 pi / n`.
pub fn default_intensity(env: &EnvironmentMap, n_lights: usize) -> Rgb {
    env.mean_radiance() * (std::f64::consts::TAU / n_lights as f64)
}

/// `n` points of a Fibonacci lattice on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = if n == 1 {
                1.0
            } else {
                1.0 - 2.0 * (i as f64 + 0.5) / n as f64
            };
            let r = (1.0 - y * y).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), y, r * phi.sin())
        })
        .collect()
}

const RELAX_ITERS: usize = 500;
const RELAX_STEP: f64 = 0.01;
const RIESZ_EXPONENT: i32 = 12;

/// Spreads points on the sphere by descending a steep Riesz energy for a fixed number of
/// steps. The largest move per step is `RELAX_STEP`, so the lattice structure survives
/// while the closest pairs are pushed apart.
pub fn relax_on_sphere(points: &mut [Vec3]) {
    let n = points.len();
    if n < 2 {
        return;
    }
    let mut forces = vec![Vec3::zeros(); n];
    for _ in 0..RELAX_ITERS {
        for (i, f) in forces.iter_mut().enumerate() {
            let mut acc = Vec3::zeros();
            for j in 0..n {
                if j == i {
                    continue;
                }
                let d = points[i] - points[j];
                let r2 = d.norm_squared().max(1e-12);
                acc += d / r2.powi(RIESZ_EXPONENT / 2 + 1);
            }
            // tangential part only
            *f = acc - points[i] * acc.dot(&points[i]);
        }
        let largest = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
        if !(largest > 0.0) {
            break;
        }
        let scale = RELAX_STEP / largest;
        for (p, f) in points.iter_mut().zip(&forces) {
            *p = (*p + f * scale).normalize();
        }
    }
}

/// Near-uniform initial directions: a Fibonacci lattice relaxed by [`relax_on_sphere`].
pub fn uniform_directions(n: usize) -> Vec<Vec3> {
    let mut pts = fibonacci_sphere(n);
    relax_on_sphere(&mut pts);
    pts
}

/// Step-1 initialization: uniform directions, constant sigma and intensity.
/// `intensity0 = None` uses [`default_intensity`].
pub fn init_uniform(
    n_lights: usize,
    env: &EnvironmentMap,
    sigma0: f64,
    intensity0: Option<Rgb>,
) -> Result<LightSet> {
    if n_lights == 0 {
        return Err(Error::InvalidLight("n_lights must be at least 1".into()));
    }
    let intensity = intensity0.unwrap_or_else(|| default_intensity(env, n_lights));
    let lights = uniform_directions(n_lights)
        .into_iter()
        .map(|direction| AreaLight {
            intensity,
            direction,
            sigma: sigma0,
        })
        .collect();
    LightSet::new(lights)
}

/// Rectangle overlay for [`visualize`]: side length is `sigma * px_per_sigma` pixels.
#[derive(Debug, Clone, Copy)]
pub struct VisualizeOptions {
    pub px_per_sigma: f64,
}

impl VisualizeOptions {
    pub fn for_env(env: &EnvironmentMap) -> Self {
        VisualizeOptions {
            px_per_sigma: env.width() as f64 / 128.0,
        }
    }
}

/// Environment map (clamped to `[0, 1]`) with one filled rectangle per light, centered on
/// the light's equirectangular position, colored by intensity normalized to the set's
/// brightest channel. Rectangles wrap around the longitude seam.
pub fn visualize(set: &LightSet, env: &EnvironmentMap) -> ImageRgb {
    visualize_with(set, env, VisualizeOptions::for_env(env))
}

pub fn visualize_with(set: &LightSet, env: &EnvironmentMap, opts: VisualizeOptions) -> ImageRgb {
    let (w, h) = (env.width(), env.height());
    let mut img = ImageRgb::from_fn(w, h, |x, y| env.texel(x, y).map(|c| c.clamp(0.0, 1.0)));
    let peak = set
        .lights()
        .iter()
        .map(|l| l.intensity.max_channel())
        .fold(0.0, f64::max);
    for light in set.lights() {
        let color = if peak > 0.0 {
            light.intensity * (1.0 / peak)
        } else {
            Rgb::ZERO
        };
        let (x0, y0, side) = rectangle(light, w, h, opts);
        for dy in 0..side {
            let y = y0 + dy as i64;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for dx in 0..side {
                let x = (x0 + dx as i64).rem_euclid(w as i64) as usize;
                *img.get_mut(x, y as usize) = color;
            }
        }
    }
    img
}

/// Top-left corner (column may be negative or past the seam) and side of a light's box.
pub fn rectangle(light: &AreaLight, w: usize, h: usize, opts: VisualizeOptions) -> (i64, i64, usize) {
    let (u, v) = dir_to_equirect(&light.direction).unwrap_or((0.5, 0.5));
    let side = ((light.sigma * opts.px_per_sigma).round() as usize).max(1);
    let cx = u * w as f64;
    let cy = v * h as f64;
    let x0 = (cx - side as f64 / 2.0).round() as i64;
    let y0 = (cy - side as f64 / 2.0).round() as i64;
    (x0, y0, side)
}

/// Unit direction helper that rejects zero vectors.
pub fn unit(x: f64, y: f64, z: f64) -> Result<Vec3> {
    normalize(&Vec3::new(x, y, z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env() -> EnvironmentMap {
        EnvironmentMap::constant(16, Rgb::ONE).unwrap()
    }

    fn min_separation_deg(dirs: &[Vec3]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..dirs.len() {
            for j in i + 1..dirs.len() {
                best = best.min(dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        best
    }

    #[test]
    fn sixteen_lights_with_default_sigma() {
        let s = init_uniform(16, &env(), 10.0, None).unwrap();
        assert_eq!(s.n_lights(), 16);
        assert!(s.lights().iter().all(|l| l.sigma == 10.0));
        for l in s.lights() {
            assert!((l.direction.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_light_is_valid() {
        let s = init_uniform(1, &env(), 10.0, Some(Rgb::ONE)).unwrap();
        assert_eq!(s.n_lights(), 1);
    }

    #[test]
    fn zero_lights_rejected() {
        assert!(init_uniform(0, &env(), 10.0, None).is_err());
    }

    #[test]
    fn lattice_separation() {
        // brute-force pairwise angles
        let dirs = uniform_directions(16);
        assert!(min_separation_deg(&dirs) > 30.0);
        let raw = fibonacci_sphere(16);
        assert!(min_separation_deg(&raw) > 30.0);
    }

    #[test]
    fn relaxation_lowers_max_dot() {
        for n in [8, 16, 32] {
            let raw = fibonacci_sphere(n);
            let relaxed = uniform_directions(n);
            assert!(min_separation_deg(&relaxed) >= min_separation_deg(&raw));
        }
    }

    #[test]
    fn sixteen_directions_clear_repulsion_threshold() {
        let d = uniform_directions(16);
        let mut worst = -1.0f64;
        for i in 0..16 {
            for j in i + 1..16 {
                worst = worst.max(d[i].dot(&d[j]));
            }
        }
        assert!(worst < 0.65, "max dot {worst}");
    }

    #[test]
    fn init_is_deterministic() {
        let a = init_uniform(16, &env(), 10.0, None).unwrap();
        let b = init_uniform(16, &env(), 10.0, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_intensity_scales_with_mean() {
        let e = EnvironmentMap::constant(16, Rgb::splat(2.0)).unwrap();
        let i = default_intensity(&e, 16);
        assert!((i[0] - 2.0 * std::f64::consts::TAU / 16.0).abs() < 1e-12);
    }

    #[test]
    fn zero_direction_rejected_on_load() {
        let text = r#"{"n_lights": 1, "lights": [{"intensity": [1,1,1], "direction": [0,0,0], "sigma": 10}]}"#;
        assert!(matches!(LightSet::from_json(text), Err(Error::InvalidLight(_))));
    }

    #[test]
    fn count_mismatch_and_garbage_rejected() {
        let text = r#"{"n_lights": 2, "lights": [{"intensity": [1,1,1], "direction": [0,0,1], "sigma": 10}]}"#;
        assert!(matches!(LightSet::from_json(text), Err(Error::MalformedLights(_))));
        assert!(matches!(LightSet::from_json("{"), Err(Error::MalformedLights(_))));
    }

    #[test]
    fn sixteen_light_file() {
        let s = init_uniform(16, &env(), 10.0, None).unwrap();
        let back = LightSet::from_json(&s.to_json()).unwrap();
        assert_eq!(back.n_lights(), 16);
    }

    fn arb_light() -> impl Strategy<Value = AreaLight> {
        (
            prop::array::uniform3(0.0f64..100.0),
            prop::array::uniform3(-1.0f64..1.0),
            SIGMA_MIN..=SIGMA_MAX,
        )
            .prop_filter_map("non-degenerate direction", |(i, d, s)| {
                let v = Vec3::new(d[0], d[1], d[2]);
                (v.norm() > 1e-3).then(|| AreaLight {
                    intensity: Rgb(i),
                    direction: v.normalize(),
                    sigma: s,
                })
            })
    }

    proptest! {
        #[test]
        fn serialization_round_trips_bitwise(lights in prop::collection::vec(arb_light(), 1..40)) {
            let set = LightSet::new(lights).unwrap();
            let back = LightSet::from_json(&set.to_json()).unwrap();
            for (a, b) in set.lights().iter().zip(back.lights()) {
                for c in 0..3 {
                    prop_assert_eq!(a.intensity[c].to_bits(), b.intensity[c].to_bits());
                    prop_assert_eq!(a.direction[c].to_bits(), b.direction[c].to_bits());
                }
                prop_assert_eq!(a.sigma.to_bits(), b.sigma.to_bits());
            }
        }
    }

    #[test]
    fn forward_light_box_is_centered() {
        let e = EnvironmentMap::constant(64, Rgb::splat(0.1)).unwrap();
        let light = AreaLight::new(Rgb::ONE, Vec3::new(0.0, 0.0, -1.0), 10.0).unwrap();
        let opts = VisualizeOptions { px_per_sigma: 1.0 };
        let (x0, _, side) = rectangle(&light, e.width(), e.height(), opts);
        assert_eq!(side, 10);
        let center = x0 as f64 + side as f64 / 2.0;
        assert!((center / e.width() as f64 - 0.5).abs() < 1.0 / e.width() as f64);
        let img = visualize_with(&LightSet::new(vec![light]).unwrap(), &e, opts);
        assert_eq!(*img.get(64, 32), Rgb::ONE);
    }

    #[test]
    fn doubling_sigma_doubles_side() {
        let opts = VisualizeOptions { px_per_sigma: 1.5 };
        let a = AreaLight::new(Rgb::ONE, Vec3::new(0.3, 0.2, -0.9).normalize(), 4.0).unwrap();
        let b = AreaLight { sigma: 8.0, ..a };
        assert_eq!(rectangle(&a, 128, 64, opts).2, 6);
        assert_eq!(rectangle(&b, 128, 64, opts).2, 12);
    }

    #[test]
    fn rectangles_wrap_at_the_seam() {
        let e = EnvironmentMap::constant(64, Rgb::ZERO).unwrap();
        let opts = VisualizeOptions { px_per_sigma: 1.0 };
        // directly behind the camera: u = 0 / 1, straddling the seam
        let dirs = uniform_directions(15)
            .into_iter()
            .chain(std::iter::once(Vec3::new(0.0, 0.0, 1.0)));
        let lights: Vec<AreaLight> = dirs
            .enumerate()
            .map(|(i, d)| AreaLight {
                intensity: Rgb::new(1.0, (i + 1) as f64 / 16.0, 0.25),
                direction: d,
                sigma: 6.0,
            })
            .collect();
        let set = LightSet::new(lights).unwrap();
        let img = visualize_with(&set, &e, opts);
        for light in set.lights() {
            let (_, y0, side) = rectangle(light, 128, 64, opts);
            let rows = (0..side as i64)
                .filter(|d| (0..64).contains(&(y0 + d)))
                .count();
            let color = light.intensity;
            let count = img.pixels().iter().filter(|p| **p == color).count();
            // boxes are small relative to the lattice spacing near the equator; allow
            // overlap only to reduce, never to exceed the full box
            assert!(count <= side * rows);
            if light.direction.z > 0.99 {
                assert_eq!(count, side * rows, "seam box clipped");
                assert_eq!(*img.get(0, 32), color);
                assert_eq!(*img.get(127, 32), color);
            }
        }
    }
}
