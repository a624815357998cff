//! Fitting a fixed number of area lights to an environment map.
//!
//! Step 1 places lights uniformly, step 2 fits intensities and directions to diffuse and
//! specular renders of a hemisphere-on-plane scene under seven rotations of the map, and
//! step 3 fits the blur widths to the shadowed renders with directions frozen.

pub mod adam;
pub mod losses;

use std::time::Instant;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{ImageRgb, Rgb, Vec3};
use crate::envmap::{env_rotation, rotate_env, EnvironmentMap};
use crate::error::{Error, Result};
use crate::filter::LogKernel;
use crate::gbuffer::GBuffer;
use crate::lighting::{init_uniform, AreaLight, LightSet, SIGMA_MAX, SIGMA_MIN};
use crate::oracle::{render_gbuffer, render_targets, SphereScene};
use crate::shadowmap::{TriangleMesh, DEFAULT_CSM_BIAS, DEFAULT_GAP_THRESHOLD};

pub use adam::{cosine_lr, Adam};
pub use losses::{loss_laplacian, loss_repulsion, loss_shading, shading_objective, PixelSet, ShadowProblem};

/// Rotation of the environment as `(longitude, latitude)` in degrees.
pub type Rotation = (f64, f64);

pub fn default_rotations() -> Vec<Rotation> {
    let mut r: Vec<Rotation> = [0.0, 72.0, 144.0, 216.0, 288.0].iter().map(|&lon| (lon, 0.0)).collect();
    r.push((0.0, 90.0));
    r.push((0.0, -90.0));
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub n_lights: usize,
    pub iters_step2: usize,
    pub iters_step3: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Scheduler ticks per cosine cycle; one tick per iteration.
    pub lr_period: usize,
    /// Per-group multipliers on the scheduled rate in step 2.
    pub intensity_lr_scale: f64,
    pub direction_lr_scale: f64,
    pub tau: f64,
    pub repulsion_weight: f64,
    pub kernel_sizes: Vec<usize>,
    pub rotations: Vec<Rotation>,
    pub shadow_resolution: usize,
    /// Height the environment is box-filtered to before rendering targets; never upsampled.
    pub env_height: usize,
    pub image_resolution: usize,
    pub sigma0: f64,
    /// Initial intensity; `None` uses the environment-derived default.
    pub intensity0: Option<[f64; 3]>,
    pub csm_bias: f64,
    /// Multiplier on the specular target so both shading losses share the
    /// intensity scale of the diffuse target, which carries `albedo / pi`.
    pub specular_target_scale: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            n_lights: 16,
            iters_step2: 1000,
            iters_step3: 300,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            lr_max: 1.0,
            lr_min: 1e-5,
            lr_period: 20,
            intensity_lr_scale: 1.0,
            direction_lr_scale: 1.0,
            tau: 0.65,
            repulsion_weight: 1.0,
            kernel_sizes: vec![15, 21, 33],
            rotations: default_rotations(),
            shadow_resolution: 256,
            env_height: 64,
            image_resolution: 256,
            sigma0: crate::lighting::DEFAULT_SIGMA,
            intensity0: None,
            csm_bias: DEFAULT_CSM_BIAS,
            specular_target_scale: 1.0 / std::f64::consts::PI,
        }
    }
}

impl OptConfig {
    /// Full-size run.
    pub fn full() -> Self {
        OptConfig::default()
    }

    /// Reduced sizes for a quick run on one core, with a peak rate of 0.05: Adam moves every
    /// coordinate by about the rate per step, and unit directions do not settle at 1.
    pub fn desk() -> Self {
        OptConfig {
            lr_max: 0.05,
            iters_step2: 300,
            iters_step3: 100,
            shadow_resolution: 128,
            env_height: 32,
            image_resolution: 64,
            ..OptConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidValue(m.to_string()));
        if self.n_lights == 0 {
            return bad("n_lights must be at least 1");
        }
        if self.iters_step2 == 0 || self.iters_step3 == 0 {
            return bad("iteration counts must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if let Some(&k) = self.kernel_sizes.iter().find(|&&k| k % 2 == 0 || k < 3) {
            return Err(Error::EvenKernel(k));
        }
        if self.rotations.is_empty() {
            return bad("at least one rotation is required");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return bad("learning-rate range must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
        }
        if !(self.intensity_lr_scale > 0.0 && self.direction_lr_scale > 0.0) {
            return bad("learning-rate scales must be positive");
        }
        if self.lr_period == 0 {
            return bad("lr_period must be at least 1");
        }
        if self.shadow_resolution < 8 || self.image_resolution < 16 || self.env_height < 2 {
            return bad("resolutions too small");
        }
        if !(SIGMA_MIN..=SIGMA_MAX).contains(&self.sigma0) {
            return Err(Error::SigmaOutOfBounds {
                sigma: self.sigma0,
                min: SIGMA_MIN,
                max: SIGMA_MAX,
            });
        }
        if let Some(i) = self.intensity0 {
            if i.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("intensity0 must be finite and non-negative");
            }
        }
        Ok(())
    }
}

/// Loss history of one run. `step2[i]` and `step3[i]` are the losses at the parameters
/// before update `i`; the `final_*` values are evaluated after the last update.
#[derive(Debug, Clone, PartialEq)]
pub struct OptTrace {
    pub step2: Vec<f64>,
    /// `[diffuse, specular, repulsion]` per step-2 iteration.
    pub step2_terms: Vec<[f64; 3]>,
    pub step3: Vec<f64>,
    pub final_step2: f64,
    pub final_step3: f64,
    pub lr: Vec<f64>,
    pub lights: LightSet,
    pub seconds: f64,
}

/// Per-rotation targets and the world-to-camera map of the rotated frame.
#[derive(Debug, Clone)]
pub struct RotationTarget {
    pub rotation: Rotation,
    /// Maps a world light direction into the camera frame of this target: `C R`.
    pub to_camera: Matrix3<f64>,
    pub diffuse: Vec<Rgb>,
    pub specular: Vec<Rgb>,
    pub shadowed: ImageRgb,
}

/// Scene, G-buffer and pre-rendered targets shared by both fitting steps.
#[derive(Debug, Clone)]
pub struct Problem {
    pub scene: SphereScene,
    pub gbuffer: GBuffer,
    pub pixels: PixelSet,
    pub targets: Vec<RotationTarget>,
}

impl Problem {
    pub fn new(env: &EnvironmentMap, cfg: &OptConfig) -> Result<Self> {
        Self::with_scene(env, cfg, SphereScene::with_resolution(cfg.image_resolution)?)
    }

    pub fn with_scene(env: &EnvironmentMap, cfg: &OptConfig, scene: SphereScene) -> Result<Self> {
        cfg.validate()?;
        let env = if env.height() > cfg.env_height {
            env.downsample(cfg.env_height)?
        } else {
            env.clone()
        };
        let gbuffer = render_gbuffer(&scene)?;
        let pixels = PixelSet::new(&gbuffer)?;
        let cam = scene.to_camera_matrix();
        let targets = cfg
            .rotations
            .iter()
            .map(|&(lon, lat)| {
                let t = render_targets(&scene, &rotate_env(&env, lon, lat));
                if !(t.diffuse.is_finite() && t.specular.is_finite() && t.shadowed_diffuse.is_finite()) {
                    return Err(Error::NonFinite(format!("oracle render at rotation ({lon}, {lat})")));
                }
                Ok(RotationTarget {
                    rotation: (lon, lat),
                    to_camera: cam * env_rotation(lon, lat),
                    diffuse: pixels.gather(&t.diffuse),
                    specular: pixels
                        .gather(&t.specular)
                        .into_iter()
                        .map(|s| s * cfg.specular_target_scale)
                        .collect(),
                    shadowed: t.shadowed_diffuse,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            scene,
            gbuffer,
            pixels,
            targets,
        })
    }

    /// Step-2 objective averaged over rotations, with the flat gradient laid out as
    /// `[I_r, I_g, I_b, d_x, d_y, d_z]` per light.
    pub fn step2_objective(&self, params: &[f64], cfg: &OptConfig, want_grad: bool) -> ([f64; 3], Vec<f64>) {
        let n = params.len() / 6;
        let world: Vec<(Rgb, Vec3)> = (0..n)
            .map(|l| {
                let p = &params[6 * l..6 * l + 6];
                (Rgb::new(p[0], p[1], p[2]), Vec3::new(p[3], p[4], p[5]))
            })
            .collect();
        let per_rotation: Vec<_> = self
            .targets
            .par_iter()
            .map(|t| {
                let cam: Vec<(Rgb, Vec3)> = world.iter().map(|(i, d)| (*i, t.to_camera * d)).collect();
                shading_objective(&self.pixels, &t.diffuse, &t.specular, &cam, want_grad)
            })
            .collect();
        let scale = 1.0 / self.targets.len() as f64;
        let mut terms = [0.0; 3];
        let mut grad = vec![0.0; params.len()];
        for (t, obj) in self.targets.iter().zip(&per_rotation) {
            terms[0] += obj.diffuse * scale;
            terms[1] += obj.specular * scale;
            if want_grad {
                let back = t.to_camera.transpose();
                for (l, (gi, gd)) in obj.grads.iter().enumerate() {
                    let gw = back * gd;
                    for c in 0..3 {
                        grad[6 * l + c] += gi[c] * scale;
                        grad[6 * l + 3 + c] += gw[c] * scale;
                    }
                }
            }
        }
        let dirs: Vec<Vec3> = world.iter().map(|(_, d)| *d).collect();
        let (rep, rep_grad) = loss_repulsion(&dirs, cfg.tau);
        terms[2] = rep;
        if want_grad {
            for (l, g) in rep_grad.iter().enumerate() {
                for c in 0..3 {
                    grad[6 * l + 3 + c] += cfg.repulsion_weight * g[c];
                }
            }
        }
        (terms, grad)
    }

    /// Step-3 shadow problems, one per rotation, for lights with frozen directions.
    pub fn shadow_problems(&self, lights: &LightSet, cfg: &OptConfig, kernels: &[LogKernel]) -> Result<Vec<ShadowProblem>> {
        let mesh = TriangleMesh::from_gbuffer(&self.gbuffer, DEFAULT_GAP_THRESHOLD)?;
        self.targets
            .iter()
            .map(|t| {
                let cam = lights.rotated(&t.to_camera);
                ShadowProblem::new(&self.gbuffer, &mesh, &t.shadowed, &cam, kernels, cfg.shadow_resolution, cfg.csm_bias)
            })
            .collect()
    }
}

fn step2_total(terms: &[f64; 3], cfg: &OptConfig) -> f64 {
    terms[0] + terms[1] + cfg.repulsion_weight * terms[2]
}

fn pack(lights: &LightSet) -> Vec<f64> {
    lights
        .lights()
        .iter()
        .flat_map(|l| {
            let (i, d) = (l.intensity, l.direction);
            [i[0], i[1], i[2], d[0], d[1], d[2]]
        })
        .collect()
}

fn project_params(params: &mut [f64], previous: &[f64]) {
    for (p, prev) in params.chunks_mut(6).zip(previous.chunks(6)) {
        for v in &mut p[..3] {
            *v = v.max(0.0);
        }
        let n = (p[3] * p[3] + p[4] * p[4] + p[5] * p[5]).sqrt();
        if n > 1e-12 && n.is_finite() {
            for v in &mut p[3..] {
                *v /= n;
            }
        } else {
            p[3..].copy_from_slice(&prev[3..]);
        }
    }
}

fn mean_over(problems: &[ShadowProblem], kernels: &[LogKernel], sigmas: &[f64], want_grad: bool) -> Result<(f64, Vec<f64>)> {
    let scale = 1.0 / problems.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; sigmas.len()];
    for p in problems {
        let (l, g) = p.evaluate(kernels, sigmas, want_grad)?;
        loss += l * scale;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b * scale;
        }
    }
    Ok((loss, grad))
}

/// Step 2 from `init`; returns the fitted lights (sigma untouched) and the loss trace.
pub fn fit_shading(problem: &Problem, init: &LightSet, cfg: &OptConfig) -> Result<(LightSet, Vec<f64>, Vec<[f64; 3]>, Vec<f64>, f64)> {
    let mut params = pack(init);
    let mut adam = Adam::new(params.len(), cfg.beta1, cfg.beta2, cfg.eps);
    let scale: Vec<f64> = (0..params.len())
        .map(|k| if k % 6 < 3 { cfg.intensity_lr_scale } else { cfg.direction_lr_scale })
        .collect();
    let mut losses = Vec::with_capacity(cfg.iters_step2);
    let mut terms_trace = Vec::with_capacity(cfg.iters_step2);
    let mut lrs = Vec::with_capacity(cfg.iters_step2);
    for it in 0..cfg.iters_step2 {
        let (terms, grad) = problem.step2_objective(&params, cfg, true);
        let total = step2_total(&terms, cfg);
        losses.push(total);
        terms_trace.push(terms);
        if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: "step2",
                iteration: it,
                losses,
            });
        }
        let lr = cosine_lr(it, cfg.lr_max, cfg.lr_min, cfg.lr_period);
        lrs.push(lr);
        let previous = params.clone();
        adam.step_scaled(&mut params, &grad, lr, Some(&scale))?;
        project_params(&mut params, &previous);
    }
    let (terms, _) = problem.step2_objective(&params, cfg, false);
    let final_loss = step2_total(&terms, cfg);
    if !final_loss.is_finite() {
        losses.push(final_loss);
        return Err(Error::Diverged {
            step: "step2",
            iteration: cfg.iters_step2,
            losses,
        });
    }
    let lights = init
        .lights()
        .iter()
        .zip(params.chunks(6))
        .map(|(l, p)| AreaLight {
            intensity: Rgb::new(p[0], p[1], p[2]),
            direction: Vec3::new(p[3], p[4], p[5]),
            sigma: l.sigma,
        })
        .collect();
    Ok((LightSet::new(lights)?, losses, terms_trace, lrs, final_loss))
}

/// Step 3: fits only sigma; intensities and directions are copied unchanged.
pub fn fit_sigma(problem: &Problem, lights: &LightSet, cfg: &OptConfig) -> Result<(LightSet, Vec<f64>, Vec<f64>, f64)> {
    let kernels = cfg
        .kernel_sizes
        .iter()
        .map(|&k| LogKernel::new(k))
        .collect::<Result<Vec<_>>>()?;
    let problems = problem.shadow_problems(lights, cfg, &kernels)?;
    let mut sigmas: Vec<f64> = lights.lights().iter().map(|l| l.sigma.clamp(SIGMA_MIN, SIGMA_MAX)).collect();
    let mut adam = Adam::new(sigmas.len(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut losses = Vec::with_capacity(cfg.iters_step3);
    let mut lrs = Vec::with_capacity(cfg.iters_step3);
    for it in 0..cfg.iters_step3 {
        let (loss, grad) = mean_over(&problems, &kernels, &sigmas, true)?;
        losses.push(loss);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: "step3",
                iteration: it,
                losses,
            });
        }
        let lr = cosine_lr(it, cfg.lr_max, cfg.lr_min, cfg.lr_period);
        lrs.push(lr);
        adam.step(&mut sigmas, &grad, lr)?;
        for s in &mut sigmas {
            *s = s.clamp(SIGMA_MIN, SIGMA_MAX);
        }
    }
    let (final_loss, _) = mean_over(&problems, &kernels, &sigmas, false)?;
    let out = lights
        .lights()
        .iter()
        .zip(&sigmas)
        .map(|(l, &sigma)| AreaLight { sigma, ..*l })
        .collect();
    Ok((LightSet::new(out)?, losses, lrs, final_loss))
}

/// Runs all three steps on `env`. Deterministic for a given `(env, cfg)`.
pub fn optimize_lights(env: &EnvironmentMap, cfg: &OptConfig) -> Result<(LightSet, OptTrace)> {
    let start = Instant::now();
    let problem = Problem::new(env, cfg)?;
    let init = init_uniform(cfg.n_lights, env, cfg.sigma0, cfg.intensity0.map(Rgb))?;
    let (shaded, step2, step2_terms, mut lr, final_step2) = fit_shading(&problem, &init, cfg)?;
    let (lights, step3, lr3, final_step3) = fit_sigma(&problem, &shaded, cfg)?;
    lr.extend(lr3);
    let trace = OptTrace {
        step2,
        step2_terms,
        step3,
        final_step2,
        final_step3,
        lr,
        lights: lights.clone(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((lights, trace))
}
