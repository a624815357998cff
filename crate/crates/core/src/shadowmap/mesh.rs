use crate::buffer::{Image, ImageScalar, Vec3};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;

pub const DEFAULT_GAP_THRESHOLD: f64 = 0.03;

/// Camera-space triangle mesh lifted from a depth map, one vertex per masked pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Source pixel `(x, y)` of each vertex.
    pub pixels: Vec<(u32, u32)>,
}

impl TriangleMesh {
    pub fn from_gbuffer(gb: &GBuffer, gap_threshold: f64) -> Result<Self> {
        depth_to_mesh(gb.depth(), gb.mask(), gb.depth_range(), gap_threshold)
    }
}

/// Camera-space position of a depth pixel; matches [`GBuffer::position`].
pub fn pixel_position(x: usize, y: usize, w: usize, h: usize, depth: f64, depth_range: f64) -> Vec3 {
    let (wf, hf) = (w as f64, h as f64);
    let s = 1.0 / wf.max(hf);
    Vec3::new(
        (x as f64 + 0.5 - 0.5 * wf) * s,
        (0.5 * hf - y as f64 - 0.5) * s,
        -depth * depth_range,
    )
}

/// Two triangles per 2x2 quad whose four pixels are masked in and whose depth spread is
/// below `gap_threshold`.
pub fn depth_to_mesh(
    depth: &ImageScalar,
    mask: &Image<bool>,
    depth_range: f64,
    gap_threshold: f64,
) -> Result<TriangleMesh> {
    depth.ensure_dims(mask)?;
    let (w, h) = depth.dims();
    let mut index = vec![u32::MAX; w * h];
    let mut vertices = Vec::new();
    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if *mask.get(x, y) {
                index[y * w + x] = vertices.len() as u32;
                vertices.push(pixel_position(x, y, w, h, *depth.get(x, y), depth_range));
                pixels.push((x as u32, y as u32));
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut triangles = Vec::new();
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let ids = [
                index[y * w + x],
                index[y * w + x + 1],
                index[(y + 1) * w + x],
                index[(y + 1) * w + x + 1],
            ];
            if ids.contains(&u32::MAX) {
                continue;
            }
            let d = [
                *depth.get(x, y),
                *depth.get(x + 1, y),
                *depth.get(x, y + 1),
                *depth.get(x + 1, y + 1),
            ];
            let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo >= gap_threshold {
                continue;
            }
            triangles.push([ids[0], ids[1], ids[2]]);
            triangles.push([ids[1], ids[3], ids[2]]);
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_three_by_three() {
        let m = depth_to_mesh(
            &ImageScalar::filled(3, 3, 0.5),
            &Image::filled(3, 3, true),
            1.0,
            DEFAULT_GAP_THRESHOLD,
        )
        .unwrap();
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.vertices.len(), 9);
        for t in &m.triangles {
            assert!(t.iter().all(|&i| (i as usize) < m.vertices.len()));
        }
    }

    #[test]
    fn depth_step_skips_quad() {
        let d = ImageScalar::from_fn(2, 2, |x, _| if x == 0 { 0.2 } else { 0.7 });
        let m = depth_to_mesh(&d, &Image::filled(2, 2, true), 1.0, 0.05).unwrap();
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn masked_out_pixel_drops_its_quads() {
        let mask = Image::from_fn(3, 3, |x, y| !(x == 1 && y == 1));
        let m = depth_to_mesh(&ImageScalar::filled(3, 3, 0.5), &mask, 1.0, 0.03).unwrap();
        assert_eq!(m.vertices.len(), 8);
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn empty_mask_is_an_error() {
        let r = depth_to_mesh(
            &ImageScalar::filled(3, 3, 0.5),
            &Image::filled(3, 3, false),
            1.0,
            0.03,
        );
        assert!(matches!(r, Err(Error::EmptyMask)));
    }
}
