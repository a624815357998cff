use crate::buffer::{ImageScalar, Vec3};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;

use super::mesh::TriangleMesh;

const BOUNDS_PADDING: f64 = 0.05;

/// Orthographic light-space frame: texel coordinates across `(a, b)`, normalized depth
/// along `dir` with 0 nearest the light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightFrame {
    pub dir: Vec3,
    pub a: Vec3,
    pub b: Vec3,
    pub origin: (f64, f64),
    pub texel: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub resolution: usize,
}

/// Right-handed orthonormal basis `(a, b)` perpendicular to `dir`.
pub fn orthonormal_basis(dir: &Vec3) -> (Vec3, Vec3) {
    let helper = if dir.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let a = dir.cross(&helper).normalize();
    let b = dir.cross(&a);
    (a, b)
}

impl LightFrame {
    /// Frame fitted to `points`, padded by 5% of the largest extent on every side.
    pub fn fit(dir: &Vec3, points: &[Vec3], resolution: usize) -> Result<Self> {
        let dir = dir.normalize();
        let (a, b) = orthonormal_basis(&dir);
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for (k, axis) in [a, b, dir].iter().enumerate() {
                let c = p.dot(axis);
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        if !(extent > 0.0) {
            return Err(Error::DegenerateBounds);
        }
        let pad = BOUNDS_PADDING * extent;
        let side = (hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad;
        let center = (0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]));
        Ok(LightFrame {
            dir,
            a,
            b,
            origin: (center.0 - 0.5 * side, center.1 - 0.5 * side),
            texel: side / resolution as f64,
            d_min: lo[2] - pad,
            d_max: hi[2] + pad,
            resolution,
        })
    }

    /// Continuous texel coordinates and normalized depth of `p`.
    pub fn project(&self, p: &Vec3) -> (f64, f64, f64) {
        let tx = (p.dot(&self.a) - self.origin.0) / self.texel;
        let ty = (p.dot(&self.b) - self.origin.1) / self.texel;
        let s = (self.d_max - p.dot(&self.dir)) / (self.d_max - self.d_min);
        (tx, ty, s)
    }

    /// Texel containing `p`, if inside the map.
    pub fn texel_of(&self, p: &Vec3) -> Option<(usize, f64)> {
        let (tx, ty, s) = self.project(p);
        let n = self.resolution as f64;
        if !(tx >= 0.0 && ty >= 0.0 && tx < n && ty < n) {
            return None;
        }
        Some((ty as usize * self.resolution + tx as usize, s))
    }
}

/// Per-texel minimum normalized depth, 1 where no geometry projects.
#[derive(Debug, Clone, PartialEq)]
pub struct LightDepthMap {
    pub frame: LightFrame,
    pub depth: ImageScalar,
}

impl LightDepthMap {
    pub fn resolution(&self) -> usize {
        self.frame.resolution
    }
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

/// Orthographic rasterization of `mesh` along `-light_dir`, sampling at texel centers.
pub fn render_light_depth(mesh: &TriangleMesh, light_dir: &Vec3, resolution: usize) -> Result<LightDepthMap> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let frame = LightFrame::fit(light_dir, &mesh.vertices, resolution)?;
    let projected: Vec<(f64, f64, f64)> = mesh.vertices.iter().map(|v| frame.project(v)).collect();
    let n = resolution;
    let mut depth = vec![1.0f64; n * n];
    for tri in &mesh.triangles {
        let [p0, p1, p2] = tri.map(|i| projected[i as usize]);
        let area = edge(p0, p1, (p2.0, p2.1));
        if area.abs() < 1e-14 {
            continue;
        }
        let inv = 1.0 / area;
        let xmin = p0.0.min(p1.0).min(p2.0);
        let xmax = p0.0.max(p1.0).max(p2.0);
        let ymin = p0.1.min(p1.1).min(p2.1);
        let ymax = p0.1.max(p1.1).max(p2.1);
        let x0 = ((xmin - 0.5).ceil().max(0.0)) as usize;
        let y0 = ((ymin - 0.5).ceil().max(0.0)) as usize;
        let x1 = (xmax - 0.5).floor().min(n as f64 - 1.0);
        let y1 = (ymax - 0.5).floor().min(n as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        for ty in y0..=y1 {
            let py = ty as f64 + 0.5;
            for tx in x0..=x1 {
                let px = tx as f64 + 0.5;
                let l0 = edge(p1, p2, (px, py)) * inv;
                let l1 = edge(p2, p0, (px, py)) * inv;
                let l2 = 1.0 - l0 - l1;
                const EPS: f64 = -1e-9;
                if l0 < EPS || l1 < EPS || l2 < EPS {
                    continue;
                }
                let s = (l0 * p0.2 + l1 * p1.2 + l2 * p2.2).clamp(0.0, 1.0);
                let cell = &mut depth[ty * n + tx];
                if s < *cell {
                    *cell = s;
                }
            }
        }
    }
    Ok(LightDepthMap {
        frame,
        depth: ImageScalar::from_vec(n, n, depth)?,
    })
}

/// Shadow-map texel and normalized receiver depth for each camera pixel; `None` outside
/// the mask or outside the map.
pub fn receivers(gb: &GBuffer, frame: &LightFrame) -> Vec<Option<(usize, f64)>> {
    let (w, h) = gb.dims();
    let mask = gb.mask();
    (0..w * h)
        .map(|i| {
            if !mask[i] {
                return None;
            }
            frame.texel_of(&gb.position(i % w, i / w))
        })
        .collect()
}
