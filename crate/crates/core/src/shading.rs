//! Shadow-less per-light shading: Lambert diffuse and a simplified Disney specular lobe,
//! with analytic gradients in the light parameters.
//!
//! Every shading image factors as `S_c(x) = I_c * g(x)` with an achromatic shape `g`, so
//! gradients are stored as `g` itself (the intensity partial) and `grad g` with respect to
//! the unnormalized direction vector.

use rayon::prelude::*;

use crate::buffer::{Image, ImageRgb, ImageScalar, Rgb, Vec3};
use crate::error::{Error, Result};
use crate::gbuffer::GBuffer;
use crate::lighting::AreaLight;

/// Orthographic viewer in camera space.
pub const VIEW: Vec3 = Vec3::new(0.0, 0.0, 1.0);

const MIN_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Diffuse,
    Specular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadingImage {
    pub component: Component,
    pub light: usize,
    pub image: ImageRgb,
}

/// `d_intensity[x]` is `dS_c/dI_c` (same for every channel); `d_direction[x]` is the
/// gradient of that shape, so `dS_c/d(dir) = I_c * d_direction[x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadingGradients {
    pub d_intensity: ImageScalar,
    pub d_direction: Image<Vec3>,
}

/// Material inputs to the specular lobe at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub specular: f64,
    pub roughness: f64,
}

/// Lambert shape `max(0, n . l)` for `l = d / |d|`, with its gradient in `d`.
pub fn lambert_shape(n: &Vec3, d: &Vec3) -> (f64, Vec3) {
    let len = d.norm();
    let l = d / len;
    let nl = n.dot(&l);
    if nl <= 0.0 {
        return (0.0, Vec3::zeros());
    }
    (nl, (n - l * nl) / len)
}

fn ggx(x: f64, alpha: f64) -> (f64, f64) {
    let a2 = alpha * alpha;
    let q = x * x * (a2 - 1.0) + 1.0;
    let pi = std::f64::consts::PI;
    let d = a2 / (pi * q * q);
    let dd = -4.0 * a2 * x * (a2 - 1.0) / (pi * q * q * q);
    (d, dd)
}

fn schlick(y: f64, f0: f64) -> (f64, f64) {
    let m = (1.0 - y).clamp(0.0, 1.0);
    let m2 = m * m;
    let m4 = m2 * m2;
    (f0 + (1.0 - f0) * m4 * m, -5.0 * (1.0 - f0) * m4)
}

fn smith_g1(x: f64, a: f64) -> (f64, f64) {
    let a2 = a * a;
    let s = (a2 + (1.0 - a2) * x * x).sqrt();
    let g = 2.0 * x / (x + s);
    let dg = 2.0 * a2 / (s * (x + s) * (x + s));
    (g, dg)
}

/// The specular BRDF value `f(n, l, v)` for unit `l` and `v` (no cosine factor).
pub fn specular_brdf(n: &Vec3, l: &Vec3, v: &Vec3, mat: Material) -> f64 {
    let nl = n.dot(l);
    let nv = n.dot(v);
    if nl <= 0.0 || nv <= 0.0 {
        return 0.0;
    }
    let hv = l + v;
    let h = hv / hv.norm();
    let alpha = (mat.roughness * mat.roughness).max(MIN_ALPHA);
    let ag = (0.5 + 0.5 * mat.roughness).powi(2);
    let f0 = 0.08 * mat.specular;
    let (d, _) = ggx(n.dot(&h), alpha);
    let (f, _) = schlick(v.dot(&h), f0);
    let (g1l, _) = smith_g1(nl, ag);
    let (g1v, _) = smith_g1(nv, ag);
    d * f * g1l * g1v / (4.0 * nl * nv)
}

/// Specular shape `f(n, l, v) * max(0, n . l)` for `l = d / |d|`, with its gradient in `d`.
pub fn specular_shape(n: &Vec3, d: &Vec3, v: &Vec3, mat: Material) -> (f64, Vec3) {
    let len = d.norm();
    let l = d / len;
    let nl = n.dot(&l);
    let nv = n.dot(v);
    if nl <= 0.0 || nv <= 0.0 {
        return (0.0, Vec3::zeros());
    }
    let hv = l + v;
    let hlen = hv.norm();
    let h = hv / hlen;
    let x = n.dot(&h);
    let y = v.dot(&h);
    let alpha = (mat.roughness * mat.roughness).max(MIN_ALPHA);
    let ag = (0.5 + 0.5 * mat.roughness).powi(2);
    let f0 = 0.08 * mat.specular;
    let (dv, dd) = ggx(x, alpha);
    let (fv, fd) = schlick(y, f0);
    let (g1l, g1ld) = smith_g1(nl, ag);
    let (g1v, _) = smith_g1(nv, ag);
    // the n.l cosine cancels one factor of the denominator
    let k = g1v / (4.0 * nv);
    let value = dv * fv * g1l * k;
    let dx_dl = (n - h * x) / hlen;
    let dy_dl = (v - h * y) / hlen;
    let grad_l = (dx_dl * (dd * fv * g1l) + dy_dl * (dv * fd * g1l) + n * (dv * fv * g1ld)) * k;
    let grad_d = (grad_l - l * l.dot(&grad_l)) / len;
    (value, grad_d)
}

fn shade(
    gb: &GBuffer,
    light: &AreaLight,
    want_grads: bool,
    shape: impl Fn(usize) -> (f64, Vec3) + Sync,
) -> (ImageRgb, Option<ShadingGradients>) {
    let (w, h) = gb.dims();
    let mask = gb.mask();
    let vals: Vec<(f64, Vec3)> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if mask[i] {
                shape(i)
            } else {
                (0.0, Vec3::zeros())
            }
        })
        .collect();
    let image = Image::from_vec(w, h, vals.iter().map(|(g, _)| light.intensity * *g).collect())
        .expect("dims");
    let grads = want_grads.then(|| ShadingGradients {
        d_intensity: Image::from_vec(w, h, vals.iter().map(|(g, _)| *g).collect()).expect("dims"),
        d_direction: Image::from_vec(w, h, vals.iter().map(|(_, d)| *d).collect()).expect("dims"),
    });
    (image, grads)
}

/// `S(x) = I * max(0, n(x) . l)` inside the mask, zero outside.
pub fn lambert(
    gb: &GBuffer,
    light: &AreaLight,
    index: usize,
    want_grads: bool,
) -> (ShadingImage, Option<ShadingGradients>) {
    let normal = gb.normal();
    let d = light.direction;
    let (image, grads) = shade(gb, light, want_grads, |i| lambert_shape(&normal[i], &d));
    (
        ShadingImage {
            component: Component::Diffuse,
            light: index,
            image,
        },
        grads,
    )
}

/// `S(x) = I * f_spec(n, l, v) * max(0, n . l)` inside the mask, zero outside.
pub fn disney_specular(
    gb: &GBuffer,
    light: &AreaLight,
    index: usize,
    view: &Vec3,
    want_grads: bool,
) -> (ShadingImage, Option<ShadingGradients>) {
    let normal = gb.normal();
    let spec = gb.specular();
    let rough = gb.roughness();
    let d = light.direction;
    let (image, grads) = shade(gb, light, want_grads, |i| {
        let mat = Material {
            specular: spec[i],
            roughness: rough[i],
        };
        specular_shape(&normal[i], &d, view, mat)
    });
    (
        ShadingImage {
            component: Component::Specular,
            light: index,
            image,
        },
        grads,
    )
}

/// `sum_l V_l * (A * S_diff_l + S_spec_l)`; unit visibility when `shadows` is `None`.
pub fn reconstruct(
    gb: &GBuffer,
    diffuse: &[ImageRgb],
    specular: &[ImageRgb],
    shadows: Option<&[ImageScalar]>,
) -> Result<ImageRgb> {
    if diffuse.len() != specular.len() {
        return Err(Error::LengthMismatch {
            expected: diffuse.len(),
            actual: specular.len(),
        });
    }
    if let Some(v) = shadows {
        if v.len() != diffuse.len() {
            return Err(Error::LengthMismatch {
                expected: diffuse.len(),
                actual: v.len(),
            });
        }
        for s in v {
            gb.depth().ensure_dims(s)?;
        }
    }
    for (d, s) in diffuse.iter().zip(specular) {
        gb.depth().ensure_dims(d)?;
        gb.depth().ensure_dims(s)?;
    }
    let (w, h) = gb.dims();
    let albedo = gb.albedo();
    let mask = gb.mask();
    let mut out = ImageRgb::filled(w, h, Rgb::ZERO);
    for l in 0..diffuse.len() {
        for i in 0..w * h {
            if !mask[i] {
                continue;
            }
            let mut term = albedo[i] * diffuse[l][i] + specular[l][i];
            if let Some(v) = shadows {
                term *= v[l][i];
            }
            out[i] += term;
        }
    }
    Ok(out)
}

/// Masked mean of `|a - b|` over pixels and channels.
pub fn masked_l1_rgb(a: &ImageRgb, b: &ImageRgb, mask: &Image<bool>) -> Result<f64> {
    a.ensure_dims(b)?;
    a.ensure_dims(mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..a.len() {
        if mask[i] {
            for c in 0..3 {
                sum += (a[i][c] - b[i][c]).abs();
            }
            count += 3;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

/// Masked mean of `|a - b|`.
pub fn masked_l1(a: &ImageScalar, b: &ImageScalar, mask: &Image<bool>) -> Result<f64> {
    a.ensure_dims(b)?;
    a.ensure_dims(mask)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..a.len() {
        if mask[i] {
            sum += (a[i] - b[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(sum / count as f64)
}

fn masked_l1_vec(a: &Image<Vec3>, b: &Image<Vec3>, mask: &Image<bool>) -> Result<f64> {
    a.ensure_dims(b)?;
    let rgb = |img: &Image<Vec3>| img.map(|n| Rgb::new(n.x, n.y, n.z));
    masked_l1_rgb(&rgb(a), &rgb(b), mask)
}

/// The maps entering the decomposition losses for one side (ground truth or prediction).
/// Shading lists hold per-light images on the predicted side and a single
/// environment-lit image on the ground-truth side; both are summed before comparison.
#[derive(Debug, Clone)]
pub struct DecompositionMaps {
    pub albedo: ImageRgb,
    pub specular: ImageScalar,
    pub roughness: ImageScalar,
    pub normal: Image<Vec3>,
    pub shading_diff: Vec<ImageRgb>,
    pub shading_spec: Vec<ImageRgb>,
    pub recon_diff: Vec<ImageRgb>,
    pub recon_full: Vec<ImageRgb>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionLosses {
    pub texture: f64,
    pub diff_shading: f64,
    pub spec_shading: f64,
    pub diff_recon: f64,
    pub full_recon: f64,
}

impl DecompositionLosses {
    pub fn total(&self) -> f64 {
        self.texture + self.diff_shading + self.spec_shading + self.diff_recon + self.full_recon
    }
}

fn summed(images: &[ImageRgb], w: usize, h: usize) -> Result<ImageRgb> {
    let mut out = ImageRgb::filled(w, h, Rgb::ZERO);
    for img in images {
        out.ensure_dims(img)?;
        for i in 0..out.len() {
            out[i] += img[i];
        }
    }
    Ok(out)
}

/// Masked mean-L1 decomposition losses. The texture term sums the four map losses.
pub fn decomposition_losses(
    mask: &Image<bool>,
    gt: &DecompositionMaps,
    pred: &DecompositionMaps,
) -> Result<DecompositionLosses> {
    let (w, h) = mask.dims();
    let texture = masked_l1_rgb(&gt.albedo, &pred.albedo, mask)?
        + masked_l1(&gt.specular, &pred.specular, mask)?
        + masked_l1(&gt.roughness, &pred.roughness, mask)?
        + masked_l1_vec(&gt.normal, &pred.normal, mask)?;
    let pair = |a: &[ImageRgb], b: &[ImageRgb]| -> Result<f64> {
        masked_l1_rgb(&summed(a, w, h)?, &summed(b, w, h)?, mask)
    };
    Ok(DecompositionLosses {
        texture,
        diff_shading: pair(&gt.shading_diff, &pred.shading_diff)?,
        spec_shading: pair(&gt.shading_spec, &pred.shading_spec)?,
        diff_recon: pair(&gt.recon_diff, &pred.recon_diff)?,
        full_recon: pair(&gt.recon_full, &pred.recon_full)?,
    })
}
