//! Relighting a G-buffer with a light set: per-light shading times per-light shadows,
//! merged in a fixed order.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{ImageRgb, ImageScalar, Rgb};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;
use crate::lighting::{AreaLight, LightSet};
use crate::shading::{self, ShadingImage, VIEW};
use crate::shadowmap::{
    dcsm, hard_shadow, receivers, render_light_depth, CsmEvaluator, ShadowMap, TriangleMesh, DEFAULT_BIAS,
    DEFAULT_CSM_BIAS, DEFAULT_GAP_THRESHOLD, DEFAULT_RESOLUTION,
};

/// Weight of the sigma loss in the shading objective.
pub const LAMBDA_SIGMA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowMode {
    None,
    Hard,
    Csm,
    /// Pixel-wise minimum of the hard and soft visibility. Not a published method: a fixed
    /// stand-in for a learned merge that keeps contact shadows sharp.
    Min,
}

impl FromStr for ShadowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ShadowMode::None),
            "hard" => Ok(ShadowMode::Hard),
            "csm" => Ok(ShadowMode::Csm),
            "min" => Ok(ShadowMode::Min),
            other => Err(Error::InvalidValue(format!("unknown shadow mode {other:?}"))),
        }
    }
}

impl fmt::Display for ShadowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShadowMode::None => "none",
            ShadowMode::Hard => "hard",
            ShadowMode::Csm => "csm",
            ShadowMode::Min => "min",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RelightRequest {
    pub gbuffer: GBuffer,
    pub lights: LightSet,
    pub mode: ShadowMode,
    pub resolution: usize,
    /// Bias of the binary test.
    pub bias: f64,
    /// Bias of the series test.
    pub csm_bias: f64,
    pub per_light: bool,
}

impl RelightRequest {
    pub fn new(gbuffer: GBuffer, lights: LightSet, mode: ShadowMode) -> Self {
        RelightRequest {
            gbuffer,
            lights,
            mode,
            resolution: DEFAULT_RESOLUTION,
            bias: DEFAULT_BIAS,
            csm_bias: DEFAULT_CSM_BIAS,
            per_light: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LightOutput {
    pub diffuse: ShadingImage,
    pub specular: ShadingImage,
    pub shadow: Option<ShadowMap>,
}

#[derive(Debug, Clone)]
pub struct RelightOutput {
    pub image: ImageRgb,
    /// Indexed like the request's lights; empty unless requested.
    pub per_light: Vec<LightOutput>,
}

/// Total order on lights used to fix the summation order.
fn light_order(a: &AreaLight, b: &AreaLight) -> Ordering {
    let key = |l: &AreaLight| {
        [
            l.direction.x,
            l.direction.y,
            l.direction.z,
            l.intensity[0],
            l.intensity[1],
            l.intensity[2],
            l.sigma,
        ]
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter()
        .zip(&kb)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Visibility of one light under `mode`; `None` for [`ShadowMode::None`].
pub fn shadow_for(
    gb: &GBuffer,
    mesh: &TriangleMesh,
    light: &AreaLight,
    mode: ShadowMode,
    resolution: usize,
    bias: f64,
    csm_bias: f64,
) -> Result<Option<ShadowMap>> {
    let dir = &light.direction;
    Ok(match mode {
        ShadowMode::None => None,
        ShadowMode::Hard => Some(hard_shadow(gb, mesh, dir, resolution, bias)?),
        ShadowMode::Csm => Some(dcsm(gb, mesh, dir, light.sigma, resolution, csm_bias, false)?.0),
        ShadowMode::Min => {
            let hard = hard_shadow(gb, mesh, dir, resolution, bias)?;
            let soft = dcsm(gb, mesh, dir, light.sigma, resolution, csm_bias, false)?.0;
            let mut v = soft.visibility;
            for (s, h) in v.pixels_mut().iter_mut().zip(hard.visibility.pixels()) {
                *s = s.min(*h);
            }
            Some(ShadowMap { visibility: v, light: 0 })
        }
    })
}

/// `sum_l V_l (A S_diff_l + S_spec_l)`, summed in a canonical light order so that the
/// result does not depend on the order of the input set.
pub fn relight(req: &RelightRequest) -> Result<RelightOutput> {
    let gb = &req.gbuffer;
    let mesh = match req.mode {
        ShadowMode::None => None,
        _ => Some(TriangleMesh::from_gbuffer(gb, DEFAULT_GAP_THRESHOLD)?),
    };
    let lights = req.lights.lights();
    let outputs: Vec<(ImageRgb, LightOutput)> = lights
        .par_iter()
        .enumerate()
        .map(|(l, light)| {
            let (diffuse, _) = shading::lambert(gb, light, l, false);
            let (specular, _) = shading::disney_specular(gb, light, l, &VIEW, false);
            let shadow = match &mesh {
                Some(m) => shadow_for(gb, m, light, req.mode, req.resolution, req.bias, req.csm_bias)?.map(|mut s| {
                    s.light = l;
                    s
                }),
                None => None,
            };
            let vis = shadow.as_ref().map(|s| std::slice::from_ref(&s.visibility));
            let contribution = shading::reconstruct(
                gb,
                std::slice::from_ref(&diffuse.image),
                std::slice::from_ref(&specular.image),
                vis,
            )?;
            Ok((
                contribution,
                LightOutput {
                    diffuse,
                    specular,
                    shadow,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..lights.len()).collect();
    order.sort_by(|&a, &b| light_order(&lights[a], &lights[b]).then(a.cmp(&b)));
    let (w, h) = gb.dims();
    let mut image = ImageRgb::filled(w, h, Rgb::ZERO);
    for &l in &order {
        for (o, c) in image.pixels_mut().iter_mut().zip(outputs[l].0.pixels()) {
            *o += *c;
        }
    }
    let per_light = if req.per_light {
        outputs.into_iter().map(|(_, o)| o).collect()
    } else {
        Vec::new()
    };
    Ok(RelightOutput { image, per_light })
}

/// `mean_masked |Y - sum_l V_l(sigma_l) S_diff_l|` with `dL/dsigma_l` when requested.
/// Shading and directions are constants of the loss.
pub fn sigma_loss(
    target: &ImageRgb,
    gb: &GBuffer,
    lights: &LightSet,
    resolution: usize,
    csm_bias: f64,
    want_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    gb.depth().ensure_dims(target)?;
    let mesh = TriangleMesh::from_gbuffer(gb, DEFAULT_GAP_THRESHOLD)?;
    let mask = gb.mask();
    let terms: Vec<(ImageRgb, Vec<f64>, Option<Vec<f64>>)> = lights
        .lights()
        .par_iter()
        .enumerate()
        .map(|(l, light)| {
            let s = shading::lambert(gb, light, l, false).0.image;
            let ldm = render_light_depth(&mesh, &light.direction, resolution)?;
            let eval = CsmEvaluator::new(&ldm, receivers(gb, &ldm.frame), csm_bias);
            let r = eval.evaluate(light.sigma, want_grad)?;
            Ok((s, r.visibility, r.gradient))
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = gb.dims();
    let mut pred = ImageRgb::filled(w, h, Rgb::ZERO);
    for (s, v, _) in &terms {
        for i in 0..pred.len() {
            pred[i] += s[i] * v[i];
        }
    }
    let count = gb.masked_count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    let norm = 1.0 / (3 * count) as f64;
    let mut loss = 0.0;
    let mut residual = ImageRgb::filled(w, h, Rgb::ZERO);
    for i in 0..pred.len() {
        if !mask[i] {
            continue;
        }
        for c in 0..3 {
            let e = pred[i][c] - target[i][c];
            loss += e.abs() * norm;
            residual[i][c] = if e > 0.0 {
                norm
            } else if e < 0.0 {
                -norm
            } else {
                0.0
            };
        }
    }
    let grads = want_grad.then(|| {
        terms
            .iter()
            .map(|(s, _, g)| {
                let g = g.as_ref().expect("gradient requested");
                (0..g.len())
                    .filter(|&i| mask[i])
                    .map(|i| g[i] * (residual[i][0] * s[i][0] + residual[i][1] * s[i][1] + residual[i][2] * s[i][2]))
                    .sum()
            })
            .collect()
    });
    Ok((loss, grads))
}

/// Shadowed diffuse image `sum_l V_l S_diff_l` with soft visibility.
pub fn shadowed_diffuse(gb: &GBuffer, lights: &LightSet, resolution: usize, csm_bias: f64) -> Result<ImageRgb> {
    let mesh = TriangleMesh::from_gbuffer(gb, DEFAULT_GAP_THRESHOLD)?;
    let parts: Vec<(ImageRgb, ImageScalar)> = lights
        .lights()
        .par_iter()
        .enumerate()
        .map(|(l, light)| {
            let s = shading::lambert(gb, light, l, false).0.image;
            let v = dcsm(gb, &mesh, &light.direction, light.sigma, resolution, csm_bias, false)?.0.visibility;
            Ok((s, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = gb.dims();
    let mut out = ImageRgb::filled(w, h, Rgb::ZERO);
    for (s, v) in &parts {
        for i in 0..out.len() {
            out[i] += s[i] * v[i];
        }
    }
    Ok(out)
}
