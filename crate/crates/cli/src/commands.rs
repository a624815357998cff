use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use relight_core::envmap::{env_rotation, rotate_env};
use relight_core::lighting::{visualize_with, VisualizeOptions};
use relight_core::lightopt::{optimize_lights, OptConfig, OptTrace};
use relight_core::oracle::{render_gbuffer, render_targets, SphereScene};
use relight_core::pipeline::{relight as relight_gbuffer, shadow_for, RelightRequest, ShadowMode};
use relight_core::shadowmap::{TriangleMesh, DEFAULT_GAP_THRESHOLD};
use nalgebra::Matrix3;
use relight_core::{io, metrics as m, GBuffer, ImageRgb, LightSet};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{sidecar, RunManifest};
use crate::{config, ApproxLightsArgs, Failure, MetricsArgs, RelightArgs, RenderGtArgs, ShadowArgs, VisualizeArgs};

type Result<T> = std::result::Result<T, Failure>;

fn finish(mut manifest: RunManifest, start: Instant, outputs: &[&Path], at: &Path) -> Result<()> {
    for o in outputs {
        manifest.add_output(o)?;
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    manifest.write(at)?;
    Ok(())
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn resolve_config(a: &ApproxLightsArgs) -> anyhow::Result<OptConfig> {
    let mut c = config::layered(a.preset, a.config.as_deref())?;
    macro_rules! flag {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { c.$f = v; } )* };
    }
    flag!(n_lights, iters_step2, iters_step3, lr_max, image_resolution, shadow_resolution, env_height);
    c.validate()?;
    Ok(c)
}

fn write_trace(path: &Path, trace: &OptTrace) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "step,iteration,loss,lr,diffuse,specular,repulsion")?;
    let n2 = trace.step2.len();
    for (i, loss) in trace.step2.iter().enumerate() {
        let lr = trace.lr.get(i).copied().unwrap_or(f64::NAN);
        let [d, s, r] = trace.step2_terms.get(i).copied().unwrap_or([f64::NAN; 3]);
        writeln!(f, "2,{i},{loss:e},{lr:e},{d:e},{s:e},{r:e}")?;
    }
    for (i, loss) in trace.step3.iter().enumerate() {
        let lr = trace.lr.get(n2 + i).copied().unwrap_or(f64::NAN);
        writeln!(f, "3,{i},{loss:e},{lr:e},,,")?;
    }
    f.flush()?;
    Ok(())
}

pub fn approx_lights(a: &ApproxLightsArgs) -> Result<()> {
    let start = Instant::now();
    let cfg = resolve_config(a).map_err(Failure::Usage)?;
    let env = io::load_env_map(&a.env).map_err(anyhow::Error::from)?;
    let (lights, trace) = optimize_lights(&env, &cfg).map_err(anyhow::Error::from)?;
    create_parent(&a.out)?;
    lights.save(&a.out).map_err(anyhow::Error::from)?;
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(t) = &a.trace {
        create_parent(t)?;
        write_trace(t, &trace)?;
        outputs.push(t);
    }
    if let Some(v) = &a.vis {
        create_parent(v)?;
        let img = visualize_with(&lights, &env, VisualizeOptions::for_env(&env));
        io::write_rgb_image(v, &img).map_err(anyhow::Error::from)?;
        outputs.push(v);
    }
    let summary = json!({
        "optimizer": cfg,
        "initial_step2_loss": trace.step2.first(),
        "final_step2_loss": trace.final_step2,
        "final_step3_loss": trace.final_step3,
    });
    let mut manifest = RunManifest::new("approx-lights", summary);
    manifest.add_input(&a.env)?;
    if let Some(c) = &a.config {
        manifest.add_input(c)?;
    }
    finish(manifest, start, &outputs, &sidecar(&a.out))
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct CameraFile {
    /// Row-major world-to-camera rotation.
    to_camera: [[f64; 3]; 3],
}

fn load_camera(path: &Path) -> anyhow::Result<Matrix3<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let c: CameraFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let m = Matrix3::from_fn(|r, k| c.to_camera[r][k]);
    if !m.iter().all(|v| v.is_finite()) || ((m.transpose() * m) - Matrix3::identity()).abs().max() > 1e-9 {
        bail!("{}: to_camera is not a rotation", path.display());
    }
    Ok(m)
}

fn load_inputs(gbuffer: &Path, lights: &Path, camera: Option<&Path>) -> anyhow::Result<(GBuffer, LightSet)> {
    let gb = GBuffer::load_dir(gbuffer).with_context(|| format!("loading G-buffer {}", gbuffer.display()))?;
    let set = LightSet::load(lights).with_context(|| format!("loading lights {}", lights.display()))?;
    let set = match camera {
        Some(c) => set.rotated(&load_camera(c)?),
        None => set,
    };
    Ok((gb, set))
}

pub fn relight(a: &RelightArgs) -> Result<()> {
    let start = Instant::now();
    let (gb, lights) = load_inputs(&a.gbuffer, &a.lights, a.render.camera.as_deref())?;
    let mut req = RelightRequest::new(gb, lights, a.shadow);
    req.resolution = a.render.resolution;
    req.bias = a.render.bias;
    req.csm_bias = a.render.csm_bias;
    req.per_light = a.dump_per_light.is_some();
    let out = relight_gbuffer(&req).map_err(anyhow::Error::from)?;
    create_parent(&a.out)?;
    io::write_rgb_image(&a.out, &out.image).map_err(anyhow::Error::from)?;
    let mut outputs: Vec<PathBuf> = vec![a.out.clone()];
    if let Some(dir) = &a.dump_per_light {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (l, o) in out.per_light.iter().enumerate() {
            let d = dir.join(format!("light_{l:02}_diffuse.exr"));
            let s = dir.join(format!("light_{l:02}_specular.exr"));
            io::write_rgb_image(&d, &o.diffuse.image).map_err(anyhow::Error::from)?;
            io::write_rgb_image(&s, &o.specular.image).map_err(anyhow::Error::from)?;
            outputs.extend([d, s]);
            if let Some(v) = &o.shadow {
                let p = dir.join(format!("light_{l:02}_shadow.png"));
                io::write_scalar_png16(&p, &v.visibility).map_err(anyhow::Error::from)?;
                outputs.push(p);
            }
        }
    }
    let mut manifest = RunManifest::new(
        "relight",
        json!({
            "shadow": a.shadow,
            "resolution": req.resolution,
            "bias": req.bias,
            "csm_bias": req.csm_bias,
        }),
    );
    manifest.add_input(&a.gbuffer)?;
    manifest.add_input(&a.lights)?;
    if let Some(c) = &a.render.camera {
        manifest.add_input(c)?;
    }
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    finish(manifest, start, &refs, &sidecar(&a.out))
}

pub fn shadow(a: &ShadowArgs) -> Result<()> {
    let start = Instant::now();
    let (gb, lights) = load_inputs(&a.gbuffer, &a.lights, a.render.camera.as_deref())?;
    let Some(light) = lights.lights().get(a.light) else {
        return Err(Failure::Usage(anyhow!("light {} out of range for {} lights", a.light, lights.n_lights())));
    };
    if a.mode == ShadowMode::None {
        return Err(Failure::Usage(anyhow!("shadow mode must be hard, csm or min")));
    }
    let mesh = TriangleMesh::from_gbuffer(&gb, DEFAULT_GAP_THRESHOLD).map_err(anyhow::Error::from)?;
    let map = shadow_for(&gb, &mesh, light, a.mode, a.render.resolution, a.render.bias, a.render.csm_bias)
        .map_err(anyhow::Error::from)?
        .expect("shadowed mode yields a map");
    create_parent(&a.out)?;
    io::write_scalar_image(&a.out, &map.visibility).map_err(anyhow::Error::from)?;
    let mut manifest = RunManifest::new(
        "shadow",
        json!({
            "light": a.light,
            "mode": a.mode,
            "resolution": a.render.resolution,
            "bias": a.render.bias,
            "csm_bias": a.render.csm_bias,
        }),
    );
    manifest.add_input(&a.gbuffer)?;
    manifest.add_input(&a.lights)?;
    if let Some(c) = &a.render.camera {
        manifest.add_input(c)?;
    }
    finish(manifest, start, &[&a.out], &sidecar(&a.out))
}

pub fn render_gt(a: &RenderGtArgs) -> Result<()> {
    let start = Instant::now();
    let scene = SphereScene::with_resolution(a.resolution).map_err(|e| Failure::Usage(e.into()))?;
    let env = io::load_env_map(&a.env).map_err(anyhow::Error::from)?;
    let env = if env.height() > a.env_height {
        env.downsample(a.env_height).map_err(anyhow::Error::from)?
    } else {
        env
    };
    let env = if a.lon != 0.0 || a.lat != 0.0 { rotate_env(&env, a.lon, a.lat) } else { env };
    let targets = render_targets(&scene, &env);
    let gb = render_gbuffer(&scene).map_err(anyhow::Error::from)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let named: [(&str, &ImageRgb); 3] = [
        ("diffuse.exr", &targets.diffuse),
        ("specular.exr", &targets.specular),
        ("shadowed_diffuse.exr", &targets.shadowed_diffuse),
    ];
    let mut outputs = Vec::new();
    for (name, img) in named {
        let p = a.out.join(name);
        io::write_rgb_image(&p, img).map_err(anyhow::Error::from)?;
        outputs.push(p);
    }
    // maps directions of the unrotated environment into camera space
    let cam = scene.to_camera_matrix() * env_rotation(a.lon, a.lat);
    let camera = CameraFile { to_camera: std::array::from_fn(|r| std::array::from_fn(|k| cam[(r, k)])) };
    let cpath = a.out.join("camera.json");
    fs::write(&cpath, serde_json::to_string_pretty(&camera).map_err(anyhow::Error::from)?)
        .with_context(|| format!("writing {}", cpath.display()))?;
    outputs.push(cpath);
    let gdir = a.out.join("gbuffer");
    gb.save_dir(&gdir).map_err(anyhow::Error::from)?;
    outputs.push(gdir);
    let mut manifest = RunManifest::new(
        "render-gt",
        json!({ "resolution": a.resolution, "env_height": a.env_height, "lon": a.lon, "lat": a.lat }),
    );
    manifest.add_input(&a.env)?;
    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    finish(manifest, start, &refs, &a.out.join("manifest.json"))
}

#[derive(Debug, Serialize)]
struct MetricsReport {
    frames: usize,
    rmse: f64,
    ssim: f64,
    /// Null when there are too few frames for the step.
    partial_rmse_1: Option<f64>,
    partial_rmse_2: Option<f64>,
    partial_rmse_4: Option<f64>,
    partial_rmse: Option<f64>,
}

const FRAME_EXTENSIONS: [&str; 5] = ["png", "exr", "hdr", "pfm", "pic"];

fn read_frames(dir: &Path) -> anyhow::Result<(Vec<PathBuf>, Vec<ImageRgb>)> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut paths: Vec<PathBuf> = crate::manifest::files_under(dir)?
        .into_iter()
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| FRAME_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no frames in {}", dir.display());
    }
    let frames = paths.iter().map(io::read_rgb_image).collect::<relight_core::Result<Vec<_>>>()?;
    Ok((paths, frames))
}

pub fn metrics(a: &MetricsArgs) -> Result<()> {
    let start = Instant::now();
    let (gt_paths, gt) = read_frames(&a.gt)?;
    let (pred_paths, pred) = read_frames(&a.pred)?;
    if gt.len() != pred.len() {
        return Err(Failure::Runtime(anyhow!("{} ground-truth frames but {} predicted", gt.len(), pred.len())));
    }
    let mut rmse = 0.0;
    let mut ssim = 0.0;
    for (g, p) in gt.iter().zip(&pred) {
        rmse += m::rmse(g, p).map_err(anyhow::Error::from)?;
        ssim += m::ssim(g, p).map_err(anyhow::Error::from)?;
    }
    let n = gt.len() as f64;
    let step = |t: usize| -> anyhow::Result<Option<f64>> {
        if gt.len() <= t {
            return Ok(None);
        }
        Ok(Some(m::partial_rmse_step(&gt, &pred, t)?))
    };
    let (t1, t2, t4) = (step(1)?, step(2)?, step(4)?);
    let partial = match (t1, t2, t4) {
        (Some(a), Some(b), Some(c)) => Some((a + b + c) / 3.0),
        _ => None,
    };
    let report = MetricsReport {
        frames: gt.len(),
        rmse: rmse / n,
        ssim: ssim / n,
        partial_rmse_1: t1,
        partial_rmse_2: t2,
        partial_rmse_4: t4,
        partial_rmse: partial,
    };
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    match &a.out {
        None => {
            println!("{text}");
            Ok(())
        }
        Some(out) => {
            create_parent(out)?;
            fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
            let mut manifest = RunManifest::new("metrics", json!({ "frames": gt.len() }));
            for p in gt_paths.iter().chain(&pred_paths) {
                manifest.add_input(p)?;
            }
            finish(manifest, start, &[out], &sidecar(out))
        }
    }
}

pub fn visualize_lights(a: &VisualizeArgs) -> Result<()> {
    let start = Instant::now();
    let lights = LightSet::load(&a.lights).map_err(anyhow::Error::from)?;
    let env = io::load_env_map(&a.env).map_err(anyhow::Error::from)?;
    let opts = match a.px_per_sigma {
        Some(px) if px > 0.0 && px.is_finite() => VisualizeOptions { px_per_sigma: px },
        Some(px) => return Err(Failure::Usage(anyhow!("--px-per-sigma must be positive, got {px}"))),
        None => VisualizeOptions::for_env(&env),
    };
    let img = visualize_with(&lights, &env, opts);
    create_parent(&a.out)?;
    io::write_rgb_image(&a.out, &img).map_err(anyhow::Error::from)?;
    let mut manifest = RunManifest::new("visualize-lights", json!({ "px_per_sigma": opts.px_per_sigma }));
    manifest.add_input(&a.lights)?;
    manifest.add_input(&a.env)?;
    finish(manifest, start, &[&a.out], &sidecar(&a.out))
}
