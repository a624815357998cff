//! Equirectangular environment maps and the direction <-> texture-coordinate convention.
//!
//! Right-handed frame, camera at the origin looking along `-z`, `+y` up.
//! `u = (atan2(x, -z) + pi) / 2pi`, `v = (pi/2 - asin(y)) / pi`, so the forward direction
//! `(0, 0, -1)` sits at the image center and the zenith on row 0.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::buffer::{normalize, Rgb, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    width: usize,
    height: usize,
    texels: Vec<Rgb>,
}

impl EnvironmentMap {
    pub fn new(width: usize, height: usize, texels: Vec<Rgb>) -> Result<Self> {
        if height == 0 || width != 2 * height {
            return Err(Error::AspectRatio { width, height });
        }
        if texels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                actual: texels.len(),
            });
        }
        if let Some(bad) = texels
            .iter()
            .find(|t| !t.is_finite() || t.0.iter().any(|&c| c < 0.0))
        {
            return Err(Error::InvalidValue(format!(
                "environment radiance must be finite and non-negative, found {:?}",
                bad.0
            )));
        }
        Ok(EnvironmentMap {
            width,
            height,
            texels,
        })
    }

    pub fn constant(height: usize, value: Rgb) -> Result<Self> {
        Self::new(2 * height, height, vec![value; 2 * height * height])
    }

    /// Builds a map by evaluating `f` at every texel-center direction.
    pub fn from_fn(height: usize, f: impl Fn(Vec3) -> Rgb) -> Result<Self> {
        let width = 2 * height;
        let mut texels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                texels.push(f(texel_direction(x, y, width, height)));
            }
        }
        Self::new(width, height, texels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn texels(&self) -> &[Rgb] {
        &self.texels
    }

    pub fn texel(&self, x: usize, y: usize) -> Rgb {
        self.texels[y * self.width + x]
    }

    /// Solid angle covered by texels of row `y`.
    pub fn texel_solid_angle(&self, y: usize) -> f64 {
        let lat = FRAC_PI_2 - PI * (y as f64 + 0.5) / self.height as f64;
        (TAU / self.width as f64) * (PI / self.height as f64) * lat.cos()
    }

    pub fn direction(&self, x: usize, y: usize) -> Vec3 {
        texel_direction(x, y, self.width, self.height)
    }

    /// Bilinear lookup; longitude wraps, latitude clamps.
    pub fn sample_uv(&self, u: f64, v: f64) -> Rgb {
        let fx = u * self.width as f64 - 0.5;
        let fy = (v * self.height as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
        let x0 = fx.floor();
        let tx = fx - x0;
        let y0 = fy.floor();
        let ty = fy - y0;
        let w = self.width as i64;
        let xa = (x0 as i64).rem_euclid(w) as usize;
        let xb = (x0 as i64 + 1).rem_euclid(w) as usize;
        let ya = y0 as usize;
        let yb = (ya + 1).min(self.height - 1);
        let top = self.texel(xa, ya) * (1.0 - tx) + self.texel(xb, ya) * tx;
        let bottom = self.texel(xa, yb) * (1.0 - tx) + self.texel(xb, yb) * tx;
        top * (1.0 - ty) + bottom * ty
    }

    pub fn sample_dir(&self, dir: &Vec3) -> Rgb {
        let n = dir.norm();
        let (u, v) = uv_from_unit(&(dir / n));
        self.sample_uv(u, v)
    }

    pub fn sample_nearest(&self, dir: &Vec3) -> Rgb {
        let n = dir.norm();
        let (u, v) = uv_from_unit(&(dir / n));
        let x = ((u * self.width as f64) as usize).min(self.width - 1);
        let y = ((v * self.height as f64) as usize).min(self.height - 1);
        self.texel(x, y)
    }

    /// Solid-angle weighted mean radiance over the sphere.
    pub fn mean_radiance(&self) -> Rgb {
        let mut acc = Rgb::ZERO;
        let mut total = 0.0;
        for y in 0..self.height {
            let w = self.texel_solid_angle(y);
            let mut row = Rgb::ZERO;
            for x in 0..self.width {
                row += self.texel(x, y);
            }
            acc += row * w;
            total += w * self.width as f64;
        }
        acc * (1.0 / total)
    }

    /// Integral of radiance over the sphere, per channel.
    pub fn total_radiance(&self) -> Rgb {
        let mut acc = Rgb::ZERO;
        for y in 0..self.height {
            let w = self.texel_solid_angle(y);
            let mut row = Rgb::ZERO;
            for x in 0..self.width {
                row += self.texel(x, y);
            }
            acc += row * w;
        }
        acc
    }

    /// Resamples to `height` rows (`2 * height` columns). Integer factors use a box
    /// filter; anything else falls back to bilinear lookups at the new texel centers.
    pub fn downsample(&self, height: usize) -> Result<EnvironmentMap> {
        let width = 2 * height;
        if height == self.height {
            return Ok(self.clone());
        }
        if height == 0 {
            return Err(Error::AspectRatio { width, height });
        }
        if height < self.height && self.height.is_multiple_of(height) {
            let f = self.height / height;
            let norm = 1.0 / (f * f) as f64;
            let mut texels = Vec::with_capacity(width * height);
            for y in 0..height {
                for x in 0..width {
                    let mut acc = Rgb::ZERO;
                    for dy in 0..f {
                        for dx in 0..f {
                            acc += self.texel(x * f + dx, y * f + dy);
                        }
                    }
                    texels.push(acc * norm);
                }
            }
            return EnvironmentMap::new(width, height, texels);
        }
        let mut texels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let u = (x as f64 + 0.5) / width as f64;
                let v = (y as f64 + 0.5) / height as f64;
                texels.push(self.sample_uv(u, v));
            }
        }
        EnvironmentMap::new(width, height, texels)
    }
}

fn texel_direction(x: usize, y: usize, width: usize, height: usize) -> Vec3 {
    equirect_to_dir(
        (x as f64 + 0.5) / width as f64,
        (y as f64 + 0.5) / height as f64,
    )
}

fn uv_from_unit(d: &Vec3) -> (f64, f64) {
    let mut u = (d.x.atan2(-d.z) + PI) / TAU;
    if u >= 1.0 {
        u -= 1.0;
    }
    let v = (FRAC_PI_2 - d.y.clamp(-1.0, 1.0).asin()) / PI;
    (u, v)
}

/// Maps a direction to equirectangular `(u, v)`; `u` wraps into `[0, 1)`.
pub fn dir_to_equirect(dir: &Vec3) -> Result<(f64, f64)> {
    Ok(uv_from_unit(&normalize(dir)?))
}

pub fn equirect_to_dir(u: f64, v: f64) -> Vec3 {
    let lon = TAU * u - PI;
    let lat = FRAC_PI_2 - PI * v;
    let (sl, cl) = lat.sin_cos();
    let (sp, cp) = lon.sin_cos();
    Vec3::new(cl * sp, sl, -cl * cp)
}

/// Rotation used by [`rotate_env`]: longitude about world `y` first, then latitude
/// about the `x` axis. Positive longitude increases `atan2(x, -z)`; positive latitude
/// tilts the forward direction upward.
pub fn env_rotation(lon_deg: f64, lat_deg: f64) -> Matrix3<f64> {
    let (sa, ca) = lon_deg.to_radians().sin_cos();
    let (sb, cb) = lat_deg.to_radians().sin_cos();
    let lon = Matrix3::new(ca, 0.0, -sa, 0.0, 1.0, 0.0, sa, 0.0, ca);
    let lat = Matrix3::new(1.0, 0.0, 0.0, 0.0, cb, -sb, 0.0, sb, cb);
    lat * lon
}

/// New map whose texel at direction `w` holds the source radiance at `R^-1 w`.
pub fn rotate_env(env: &EnvironmentMap, lon_deg: f64, lat_deg: f64) -> EnvironmentMap {
    let inv = env_rotation(lon_deg, lat_deg).transpose();
    let (w, h) = (env.width, env.height);
    let texels: Vec<Rgb> = (0..h)
        .into_par_iter()
        .flat_map_iter(|y| {
            let inv = &inv;
            (0..w).map(move |x| env.sample_dir(&(inv * texel_direction(x, y, w, h))))
        })
        .collect();
    EnvironmentMap {
        width: w,
        height: h,
        texels,
    }
}
