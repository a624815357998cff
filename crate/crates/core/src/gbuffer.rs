//! Co-registered geometry and material maps for one subject.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::buffer::{Image, ImageRgb, ImageScalar, Rgb, Vec3};
use crate::error::{Error, Result};
use crate::io;

pub const NORMAL_TOLERANCE: f64 = 1e-4;

/// Camera-space G-buffer. Depth is normalized to `[0, 1]` (larger is farther); the
/// metric span of that range, in units of the image's larger side, is `depth_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct GBuffer {
    depth: ImageScalar,
    normal: Image<Vec3>,
    albedo: ImageRgb,
    specular: ImageScalar,
    roughness: ImageScalar,
    mask: Image<bool>,
    depth_range: f64,
}

/// Sidecar metadata stored next to the maps in a G-buffer directory.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GBufferMeta {
    pub depth_range: f64,
}

impl GBuffer {
    pub fn new(
        depth: ImageScalar,
        normal: Image<Vec3>,
        albedo: ImageRgb,
        specular: ImageScalar,
        roughness: ImageScalar,
        mask: Image<bool>,
        depth_range: f64,
    ) -> Result<Self> {
        depth.ensure_dims(&normal)?;
        depth.ensure_dims(&albedo)?;
        depth.ensure_dims(&specular)?;
        depth.ensure_dims(&roughness)?;
        depth.ensure_dims(&mask)?;
        if !(depth_range > 0.0) || !depth_range.is_finite() {
            return Err(Error::InvalidValue(format!(
                "depth_range must be positive, got {depth_range}"
            )));
        }
        for i in 0..depth.len() {
            if !mask[i] {
                continue;
            }
            let n = normal[i].norm();
            if (n - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(Error::InvalidValue(format!(
                    "normal at pixel {i} has length {n}"
                )));
            }
            if !(0.0..=1.0).contains(&depth[i]) {
                return Err(Error::InvalidValue(format!(
                    "depth at pixel {i} is {} (outside [0, 1])",
                    depth[i]
                )));
            }
            for (name, v) in [("specular", specular[i]), ("roughness", roughness[i])] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidValue(format!(
                        "{name} at pixel {i} is {v} (outside [0, 1])"
                    )));
                }
            }
            if !albedo[i].is_finite() {
                return Err(Error::InvalidValue(format!("albedo at pixel {i} not finite")));
            }
        }
        Ok(GBuffer {
            depth,
            normal,
            albedo,
            specular,
            roughness,
            mask,
            depth_range,
        })
    }

    /// Flat constant-material buffer, handy for tests.
    pub fn uniform(
        width: usize,
        height: usize,
        depth: f64,
        normal: Vec3,
        albedo: Rgb,
        specular: f64,
        roughness: f64,
    ) -> Result<Self> {
        GBuffer::new(
            ImageScalar::filled(width, height, depth),
            Image::filled(width, height, normal),
            ImageRgb::filled(width, height, albedo),
            ImageScalar::filled(width, height, specular),
            ImageScalar::filled(width, height, roughness),
            Image::filled(width, height, true),
            1.0,
        )
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }

    pub fn depth(&self) -> &ImageScalar {
        &self.depth
    }

    pub fn normal(&self) -> &Image<Vec3> {
        &self.normal
    }

    pub fn albedo(&self) -> &ImageRgb {
        &self.albedo
    }

    pub fn specular(&self) -> &ImageScalar {
        &self.specular
    }

    pub fn roughness(&self) -> &ImageScalar {
        &self.roughness
    }

    pub fn mask(&self) -> &Image<bool> {
        &self.mask
    }

    pub fn depth_range(&self) -> f64 {
        self.depth_range
    }

    pub fn masked_count(&self) -> usize {
        self.mask.pixels().iter().filter(|&&m| m).count()
    }

    pub fn with_albedo(mut self, albedo: ImageRgb) -> Result<Self> {
        self.depth.ensure_dims(&albedo)?;
        self.albedo = albedo;
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Image<bool>) -> Result<Self> {
        self.depth.ensure_dims(&mask)?;
        self.mask = mask;
        Ok(self)
    }

    /// Camera-space position of pixel `(x, y)`: the image spans one unit along its
    /// larger side, centered on the optical axis, and depth extends along `-z`.
    pub fn position(&self, x: usize, y: usize) -> Vec3 {
        let (w, h) = (self.width() as f64, self.height() as f64);
        let s = 1.0 / w.max(h);
        Vec3::new(
            (x as f64 + 0.5 - 0.5 * w) * s,
            (0.5 * h - y as f64 - 0.5) * s,
            -self.depth.get(x, y) * self.depth_range,
        )
    }

    /// Loads `depth.png`, `normal.{png,exr}`, `albedo.{png,exr}`, `specular.png`,
    /// `roughness.png`, `mask.png` and optional `gbuffer.json` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let pick = |stem: &str| -> Result<std::path::PathBuf> {
            for ext in ["png", "exr", "pfm", "hdr"] {
                let p = dir.join(format!("{stem}.{ext}"));
                if p.exists() {
                    return Ok(p);
                }
            }
            Err(Error::Io {
                path: dir.join(format!("{stem}.png")),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "map not found"),
            })
        };
        let depth = io::read_scalar_image(pick("depth")?)?;
        let (w, h) = depth.dims();
        let normal = io::read_normal_map(pick("normal")?)?.map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                *n
            }
        });
        let albedo = io::read_rgb_image(pick("albedo")?)?;
        let specular = match pick("specular") {
            Ok(p) => io::read_scalar_image(p)?,
            Err(_) => ImageScalar::filled(w, h, 0.5),
        };
        let roughness = match pick("roughness") {
            Ok(p) => io::read_scalar_image(p)?,
            Err(_) => ImageScalar::filled(w, h, 0.5),
        };
        let mask = match pick("mask") {
            Ok(p) => io::read_scalar_image(p)?.map(|&v| v >= 0.5),
            Err(_) => Image::filled(w, h, true),
        };
        let meta_path = dir.join("gbuffer.json");
        let depth_range = if meta_path.exists() {
            let text = std::fs::read_to_string(&meta_path).map_err(|source| Error::Io {
                path: meta_path.clone(),
                source,
            })?;
            let meta: GBufferMeta = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidValue(format!("gbuffer.json: {e}")))?;
            meta.depth_range
        } else {
            1.0
        };
        // zero normals outside the mask are common in exported maps
        let normal = Image::from_fn(w, h, |x, y| {
            if *mask.get(x, y) {
                *normal.get(x, y)
            } else {
                Vec3::new(0.0, 0.0, 1.0)
            }
        });
        GBuffer::new(depth, normal, albedo, specular, roughness, mask, depth_range)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        io::write_scalar_png16(dir.join("depth.png"), &self.depth)?;
        io::write_normal_map(dir.join("normal.exr"), &self.normal)?;
        io::write_rgb_image(dir.join("albedo.exr"), &self.albedo)?;
        io::write_scalar_png16(dir.join("specular.png"), &self.specular)?;
        io::write_scalar_png16(dir.join("roughness.png"), &self.roughness)?;
        io::write_scalar_png16(
            dir.join("mask.png"),
            &self.mask.map(|&m| if m { 1.0 } else { 0.0 }),
        )?;
        let meta = serde_json::to_string_pretty(&GBufferMeta {
            depth_range: self.depth_range,
        })
        .expect("metadata serializes");
        let meta_path = dir.join("gbuffer.json");
        std::fs::write(&meta_path, meta).map_err(|source| Error::Io {
            path: meta_path,
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unit_normals() {
        let r = GBuffer::uniform(
            2,
            2,
            0.5,
            Vec3::new(0.0, 0.0, 1.1),
            Rgb::ONE,
            0.5,
            0.5,
        );
        assert!(matches!(r, Err(Error::InvalidValue(_))));
    }

    #[test]
    fn rejects_mismatched_maps() {
        let r = GBuffer::new(
            ImageScalar::filled(2, 2, 0.5),
            Image::filled(2, 2, Vec3::z()),
            ImageRgb::filled(3, 2, Rgb::ONE),
            ImageScalar::filled(2, 2, 0.5),
            ImageScalar::filled(2, 2, 0.5),
            Image::filled(2, 2, true),
            1.0,
        );
        assert!(matches!(r, Err(Error::ResolutionMismatch { .. })));
    }

    #[test]
    fn positions_span_unit_extent() {
        let g = GBuffer::uniform(4, 2, 1.0, Vec3::z(), Rgb::ONE, 0.5, 0.5).unwrap();
        let a = g.position(0, 0);
        let b = g.position(3, 1);
        assert!((a.x + 0.375).abs() < 1e-12 && (b.x - 0.375).abs() < 1e-12);
        assert!((a.y - 0.125).abs() < 1e-12 && (b.y + 0.125).abs() < 1e-12);
        assert_eq!(a.z, -1.0);
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GBuffer::new(
            ImageScalar::from_fn(5, 4, |x, y| (x + y) as f64 / 7.0),
            Image::from_fn(5, 4, |x, _| Vec3::new(x as f64 * 0.1, 0.2, 1.0).normalize()),
            ImageRgb::from_fn(5, 4, |x, y| Rgb::new(x as f64 / 4.0, y as f64 / 3.0, 0.5)),
            ImageScalar::filled(5, 4, 0.25),
            ImageScalar::filled(5, 4, 0.75),
            Image::from_fn(5, 4, |x, _| x > 0),
            0.3,
        )
        .unwrap();
        g.save_dir(dir.path()).unwrap();
        let back = GBuffer::load_dir(dir.path()).unwrap();
        assert_eq!(back.mask(), g.mask());
        assert_eq!(back.depth_range(), 0.3);
        for i in 0..g.depth().len() {
            assert!((back.depth()[i] - g.depth()[i]).abs() < 1e-4);
            if g.mask()[i] {
                assert!((back.normal()[i] - g.normal()[i]).norm() < 1e-3);
            }
            for c in 0..3 {
                assert!((back.albedo()[i][c] - g.albedo()[i][c]).abs() < 1e-3);
            }
        }
    }
}
