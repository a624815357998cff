//! Shadows from a depth map: mesh reconstruction, light-space depth, hard shadow mapping
//! and convolutional shadow mapping with a differentiable blur width.

pub mod csm;
pub mod mesh;
pub mod raster;

pub use csm::{csm_step, CsmEvaluator, CsmResult, CsmStack};
pub use mesh::{depth_to_mesh, TriangleMesh, DEFAULT_GAP_THRESHOLD};
pub use raster::{receivers, render_light_depth, LightDepthMap, LightFrame};

use crate::buffer::{ImageScalar, Vec3};
use crate::error::Result;
use crate::gbuffer::GBuffer;

pub const DEFAULT_RESOLUTION: usize = 256;
/// Depth bias for the binary test, in normalized light-space depth.
pub const DEFAULT_BIAS: f64 = 0.01;
/// Depth bias for the series test; one over the number of terms places the first
/// overshoot of the truncated series at zero depth difference.
pub const DEFAULT_CSM_BIAS: f64 = 1.0 / csm::K_TERMS as f64;

/// Per-pixel visibility in `[0, 1]`, 1 outside the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowMap {
    pub visibility: ImageScalar,
    pub light: usize,
}

fn to_image(gb: &GBuffer, values: Vec<f64>) -> ImageScalar {
    let (w, h) = gb.dims();
    ImageScalar::from_vec(w, h, values).expect("one value per pixel")
}

/// Binary test `V = [d <= z + bias]` with nearest-texel lookup.
pub fn hard_shadow(
    gb: &GBuffer,
    mesh: &TriangleMesh,
    light_dir: &Vec3,
    resolution: usize,
    bias: f64,
) -> Result<ShadowMap> {
    let ldm = render_light_depth(mesh, light_dir, resolution)?;
    Ok(hard_shadow_from(gb, &ldm, bias))
}

pub fn hard_shadow_from(gb: &GBuffer, ldm: &LightDepthMap, bias: f64) -> ShadowMap {
    let values = receivers(gb, &ldm.frame)
        .into_iter()
        .map(|r| match r {
            Some((t, d)) if d > ldm.depth[t] + bias => 0.0,
            _ => 1.0,
        })
        .collect();
    ShadowMap {
        visibility: to_image(gb, values),
        light: 0,
    }
}

/// Soft visibility with Gaussian pre-filtering of the series basis, and optionally
/// `dV/dsigma` (zero where the clamp is active).
#[allow(clippy::too_many_arguments)]
pub fn dcsm(
    gb: &GBuffer,
    mesh: &TriangleMesh,
    light_dir: &Vec3,
    sigma: f64,
    resolution: usize,
    bias: f64,
    want_grad: bool,
) -> Result<(ShadowMap, Option<ImageScalar>)> {
    csm::check_sigma(sigma)?;
    let ldm = render_light_depth(mesh, light_dir, resolution)?;
    let eval = CsmEvaluator::new(&ldm, receivers(gb, &ldm.frame), bias);
    let res = eval.evaluate(sigma, want_grad)?;
    Ok((
        ShadowMap {
            visibility: to_image(gb, res.visibility),
            light: 0,
        },
        res.gradient.map(|g| to_image(gb, g)),
    ))
}
