use rayon::prelude::*;

use crate::buffer::{ImageRgb, ImageScalar, Rgb, Vec3};
use crate::error::{Error, Result};
use crate::filter::LogKernel;
use crate::gbuffer::GBuffer;
use crate::lighting::LightSet;
use crate::shading::{self, lambert_shape, specular_shape, Material, VIEW};
use crate::shadowmap::{receivers, render_light_depth, CsmEvaluator, TriangleMesh, DEFAULT_GAP_THRESHOLD};

/// Masked pixels of a G-buffer with the per-pixel inputs of the shading model.
#[derive(Debug, Clone)]
pub struct PixelSet {
    pub index: Vec<usize>,
    pub normal: Vec<Vec3>,
    pub material: Vec<Material>,
}

impl PixelSet {
    pub fn new(gb: &GBuffer) -> Result<Self> {
        let index: Vec<usize> = (0..gb.depth().len()).filter(|&i| gb.mask()[i]).collect();
        if index.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(PixelSet {
            normal: index.iter().map(|&i| gb.normal()[i]).collect(),
            material: index
                .iter()
                .map(|&i| Material {
                    specular: gb.specular()[i],
                    roughness: gb.roughness()[i],
                })
                .collect(),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn gather(&self, img: &ImageRgb) -> Vec<Rgb> {
        self.index.iter().map(|&i| img[i]).collect()
    }
}

/// Values and gradients of the two shading losses for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadingObjective {
    pub diffuse: f64,
    pub specular: f64,
    /// Per light: `dL/dI` and `dL/d(dir)` in the frame of the supplied directions.
    pub grads: Vec<(Rgb, Vec3)>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `mean |T_diff - sum_l I_l g_diff_l| + mean |T_spec - sum_l I_l g_spec_l|` over masked
/// pixels and channels, with gradients in each light's intensity and (free) direction.
/// Directions are given in the G-buffer's camera frame.
pub fn shading_objective(
    px: &PixelSet,
    target_diff: &[Rgb],
    target_spec: &[Rgb],
    lights: &[(Rgb, Vec3)],
    want_grad: bool,
) -> ShadingObjective {
    let m = px.len();
    let nl = lights.len();
    let mut gd = vec![0.0; nl * m];
    let mut gs = vec![0.0; nl * m];
    let mut dgd = vec![Vec3::zeros(); if want_grad { nl * m } else { 0 }];
    let mut dgs = vec![Vec3::zeros(); if want_grad { nl * m } else { 0 }];
    let mut pred_d = vec![Rgb::ZERO; m];
    let mut pred_s = vec![Rgb::ZERO; m];
    for (l, (intensity, dir)) in lights.iter().enumerate() {
        for i in 0..m {
            let n = &px.normal[i];
            let (a, da) = lambert_shape(n, dir);
            let (b, db) = specular_shape(n, dir, &VIEW, px.material[i]);
            gd[l * m + i] = a;
            gs[l * m + i] = b;
            if want_grad {
                dgd[l * m + i] = da;
                dgs[l * m + i] = db;
            }
            pred_d[i] += *intensity * a;
            pred_s[i] += *intensity * b;
        }
    }
    let norm = 1.0 / (3 * m) as f64;
    let mut ld = 0.0;
    let mut ls = 0.0;
    let mut rd = vec![Rgb::ZERO; m];
    let mut rs = vec![Rgb::ZERO; m];
    for i in 0..m {
        for c in 0..3 {
            let e = pred_d[i][c] - target_diff[i][c];
            let f = pred_s[i][c] - target_spec[i][c];
            ld += e.abs();
            ls += f.abs();
            rd[i][c] = sign(e) * norm;
            rs[i][c] = sign(f) * norm;
        }
    }
    let grads = if want_grad {
        lights
            .iter()
            .enumerate()
            .map(|(l, (intensity, _))| {
                let mut gi = Rgb::ZERO;
                let mut gdir = Vec3::zeros();
                for i in 0..m {
                    let (a, b) = (gd[l * m + i], gs[l * m + i]);
                    if a == 0.0 && b == 0.0 {
                        continue;
                    }
                    gi += rd[i] * a + rs[i] * b;
                    let wd = rd[i][0] * intensity[0] + rd[i][1] * intensity[1] + rd[i][2] * intensity[2];
                    let ws = rs[i][0] * intensity[0] + rs[i][1] * intensity[1] + rs[i][2] * intensity[2];
                    gdir += dgd[l * m + i] * wd + dgs[l * m + i] * ws;
                }
                (gi, gdir)
            })
            .collect()
    } else {
        Vec::new()
    };
    ShadingObjective {
        diffuse: ld * norm,
        specular: ls * norm,
        grads,
    }
}

/// Masked mean-L1 of the summed per-light Lambert and specular images against the
/// targets. Light directions are taken in the G-buffer's camera frame.
pub fn loss_shading(
    target_diff: &ImageRgb,
    target_spec: &ImageRgb,
    lights: &LightSet,
    gb: &GBuffer,
) -> Result<(f64, f64)> {
    gb.depth().ensure_dims(target_diff)?;
    gb.depth().ensure_dims(target_spec)?;
    let (w, h) = gb.dims();
    let mut sum_d = ImageRgb::filled(w, h, Rgb::ZERO);
    let mut sum_s = ImageRgb::filled(w, h, Rgb::ZERO);
    for (l, light) in lights.lights().iter().enumerate() {
        let d = shading::lambert(gb, light, l, false).0.image;
        let s = shading::disney_specular(gb, light, l, &VIEW, false).0.image;
        for i in 0..d.len() {
            sum_d[i] += d[i];
            sum_s[i] += s[i];
        }
    }
    Ok((
        shading::masked_l1_rgb(target_diff, &sum_d, gb.mask())?,
        shading::masked_l1_rgb(target_spec, &sum_s, gb.mask())?,
    ))
}

/// Hinge repulsion over ordered pairs, `sum max(0, <l, m> - tau)^2 / (N (N - 1))`, with
/// the gradient in each (free) direction.
pub fn loss_repulsion(dirs: &[Vec3], tau: f64) -> (f64, Vec<Vec3>) {
    let n = dirs.len();
    let mut grads = vec![Vec3::zeros(); n];
    if n < 2 {
        return (0.0, grads);
    }
    let unit: Vec<Vec3> = dirs.iter().map(|d| d.normalize()).collect();
    let norm = 1.0 / (n * (n - 1)) as f64;
    let mut loss = 0.0;
    let mut dunit = vec![Vec3::zeros(); n];
    for l in 0..n {
        for m in 0..n {
            if l == m {
                continue;
            }
            let h = (unit[l].dot(&unit[m]) - tau).max(0.0);
            if h > 0.0 {
                loss += h * h;
                // each unordered pair contributes twice
                dunit[l] += unit[m] * (4.0 * h * norm);
            }
        }
    }
    for l in 0..n {
        let len = dirs[l].norm();
        grads[l] = (dunit[l] - unit[l] * unit[l].dot(&dunit[l])) / len;
    }
    (loss * norm, grads)
}

/// One light's fixed inputs to the shadow loss: its (detached) shading and CSM receivers.
#[derive(Debug, Clone)]
pub struct ShadowTerm {
    pub light: usize,
    pub shading: ImageRgb,
    pub csm: CsmEvaluator,
}

/// Fixed inputs of the Laplacian shadow loss for one target image.
#[derive(Debug, Clone)]
pub struct ShadowProblem {
    pub mask: Vec<bool>,
    pub masked: usize,
    pub width: usize,
    pub height: usize,
    pub target_log: Vec<[ImageScalar; 3]>,
    pub terms: Vec<ShadowTerm>,
}

fn log_rgb(kernel: &LogKernel, img: &ImageRgb) -> [ImageScalar; 3] {
    std::array::from_fn(|c| kernel.apply(&img.channel(c)))
}

impl ShadowProblem {
    /// `lights` hold camera-frame directions for `gb`. Lights with no lit pixel are
    /// dropped since they cannot affect the loss.
    pub fn new(
        gb: &GBuffer,
        mesh: &TriangleMesh,
        target_shadowed: &ImageRgb,
        lights: &LightSet,
        kernels: &[LogKernel],
        resolution: usize,
        bias: f64,
    ) -> Result<Self> {
        gb.depth().ensure_dims(target_shadowed)?;
        let (w, h) = gb.dims();
        let mut terms = Vec::new();
        for (l, light) in lights.lights().iter().enumerate() {
            let shading = shading::lambert(gb, light, l, false).0.image;
            if shading.pixels().iter().all(|p| p.max_channel() == 0.0) {
                continue;
            }
            let ldm = render_light_depth(mesh, &light.direction, resolution)?;
            let csm = CsmEvaluator::new(&ldm, receivers(gb, &ldm.frame), bias);
            terms.push(ShadowTerm {
                light: l,
                shading,
                csm,
            });
        }
        let mask = gb.mask().pixels().to_vec();
        Ok(ShadowProblem {
            masked: mask.iter().filter(|&&m| m).count(),
            mask,
            width: w,
            height: h,
            target_log: kernels.iter().map(|k| log_rgb(k, target_shadowed)).collect(),
            terms,
        })
    }

    /// `sum_k mean_masked |LoG_k(T) - LoG_k(sum_l V_l(sigma_l) S_l)|` and `dL/dsigma_l`
    /// for every light index up to `sigmas.len()`.
    pub fn evaluate(&self, kernels: &[LogKernel], sigmas: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let (w, h) = (self.width, self.height);
        let evals: Vec<_> = self
            .terms
            .par_iter()
            .map(|t| t.csm.evaluate(sigmas[t.light], want_grad))
            .collect::<Result<Vec<_>>>()?;
        let mut pred = ImageRgb::filled(w, h, Rgb::ZERO);
        for (t, e) in self.terms.iter().zip(&evals) {
            for i in 0..pred.len() {
                if self.mask[i] {
                    pred[i] += t.shading[i] * e.visibility[i];
                }
            }
        }
        let norm = 1.0 / (3 * self.masked) as f64;
        let mut loss = 0.0;
        let mut dpred = [
            ImageScalar::filled(w, h, 0.0),
            ImageScalar::filled(w, h, 0.0),
            ImageScalar::filled(w, h, 0.0),
        ];
        for (k, kernel) in kernels.iter().enumerate() {
            let resp = log_rgb(kernel, &pred);
            for c in 0..3 {
                let mut residual = ImageScalar::filled(w, h, 0.0);
                for i in 0..resp[c].len() {
                    if !self.mask[i] {
                        continue;
                    }
                    let e = resp[c][i] - self.target_log[k][c][i];
                    loss += e.abs() * norm;
                    residual[i] = sign(e) * norm;
                }
                if want_grad {
                    let back = kernel.apply_adjoint(&residual);
                    for (d, b) in dpred[c].pixels_mut().iter_mut().zip(back.pixels()) {
                        *d += b;
                    }
                }
            }
        }
        let mut grads = vec![0.0; sigmas.len()];
        if want_grad {
            for (t, e) in self.terms.iter().zip(&evals) {
                let dv = e.gradient.as_ref().expect("gradient requested");
                let mut g = 0.0;
                for i in 0..dv.len() {
                    if !self.mask[i] || dv[i] == 0.0 {
                        continue;
                    }
                    let s = t.shading[i];
                    g += dv[i] * (dpred[0][i] * s[0] + dpred[1][i] * s[1] + dpred[2][i] * s[2]);
                }
                grads[t.light] = g;
            }
        }
        Ok((loss, grads))
    }
}

/// Laplacian shadow loss for one target with camera-frame light directions, and its
/// gradient in each light's sigma.
pub fn loss_laplacian(
    target_shadowed: &ImageRgb,
    lights: &LightSet,
    gb: &GBuffer,
    kernel_sizes: &[usize],
    resolution: usize,
    bias: f64,
) -> Result<(f64, Vec<f64>)> {
    let kernels = kernel_sizes
        .iter()
        .map(|&k| LogKernel::new(k))
        .collect::<Result<Vec<_>>>()?;
    let mesh = TriangleMesh::from_gbuffer(gb, DEFAULT_GAP_THRESHOLD)?;
    let problem = ShadowProblem::new(gb, &mesh, target_shadowed, lights, &kernels, resolution, bias)?;
    let sigmas: Vec<f64> = lights.lights().iter().map(|l| l.sigma).collect();
    problem.evaluate(&kernels, &sigmas, true)
}
