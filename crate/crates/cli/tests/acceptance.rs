//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on any failure.
//! Run with `cargo test -p relight-cli --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relight_core::envmap::env_rotation;
use relight_core::filter::kernel_size;
use relight_core::lighting::uniform_directions;
use relight_core::lightopt::{fit_shading, fit_sigma, loss_repulsion, optimize_lights, OptConfig, Problem};
use relight_core::metrics::{partial_rmse, rmse, scale_invariant_l1, ssim, LAMBDA_SLOPE};
use relight_core::oracle::{raycast_visibility, render_gbuffer, render_targets, SphereScene};
use relight_core::pipeline::{shadowed_diffuse, LAMBDA_SIGMA};
use relight_core::shading::{lambert_shape, specular_shape, Material};
use relight_core::shadowmap::{self, csm, TriangleMesh, DEFAULT_BIAS, DEFAULT_CSM_BIAS, DEFAULT_GAP_THRESHOLD};
use relight_core::{Image, ImageRgb, ImageScalar, Rgb, Vec3};

use common::*;

// pinned tolerances and budgets
const C1_MAX_ERROR: f64 = 0.1;
const C1_MIN_GAP: f64 = 0.1;
const C1_SECONDS: f64 = 1.0;
const C3_REL_ERROR: f64 = 1e-3;
const C3_MIN_GRAD: f64 = 1e-4;
const C3_H: f64 = 1e-3;
const C3_SECONDS: f64 = 30.0;
const C4_AGREEMENT: f64 = 0.97;
const C4_SECONDS_PER_DIRECTION: f64 = 10.0;
const C5_REL_ERROR: f64 = 1e-4;
const C5_CONFIGS: usize = 100;
const C6_MAX_ANGLE_DEG: f64 = 10.0;
const C6_MIN_DROP: f64 = 0.5;
const C6_DESK_SECONDS: f64 = 120.0;
const C6_FULL_SECONDS: f64 = 3.0 * 300.0;
const C8_TOL: f64 = 1e-12;
const C9_COINCIDENT: f64 = 0.1225;
const C9_TOL: f64 = 1e-12;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn hemisphere(resolution: usize) -> (SphereScene, relight_core::GBuffer, TriangleMesh) {
    let scene = SphereScene::with_resolution(resolution).unwrap();
    let gb = render_gbuffer(&scene).unwrap();
    let mesh = TriangleMesh::from_gbuffer(&gb, DEFAULT_GAP_THRESHOLD).unwrap();
    (scene, gb, mesh)
}

fn world_light(elevation_deg: f64, azimuth_deg: f64) -> Vec3 {
    let (e, a) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
    Vec3::new(e.cos() * a.cos(), e.sin(), e.cos() * a.sin())
}

fn c1_csm_step() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..=100 {
        for j in 0..=100 {
            let (d, z) = (i as f64 / 100.0, j as f64 / 100.0);
            if (z - d).abs() < C1_MIN_GAP - 1e-12 {
                continue;
            }
            let h = if z > d { 1.0 } else { 0.0 };
            worst = worst.max((csm::csm_step(d, z) - h).abs());
        }
    }
    let t = start.elapsed().as_secs_f64();
    verdict(worst <= C1_MAX_ERROR && t < C1_SECONDS, format!("max |f - H| = {worst:.4} (<= {C1_MAX_ERROR}), {t:.3} s"))
}

fn c2_kernel_size() -> Verdict {
    let expected = [(0.5, 5), (1.0, 7), (3.4, 23), (10.0, 61), (40.0, 241)];
    let (_, gb, mesh) = hemisphere(32);
    let ldm = shadowmap::render_light_depth(&mesh, &Vec3::new(0.0, 0.6, 0.8), csm::REFERENCE_RESOLUTION).unwrap();
    let eval = csm::CsmEvaluator::new(&ldm, shadowmap::receivers(&gb, &ldm.frame), DEFAULT_CSM_BIAS);
    let mut ok = true;
    let mut parts = Vec::new();
    for (sigma, taps) in expected {
        let k = kernel_size(sigma);
        let w = 2 * eval.radius_for(sigma) + 1;
        ok &= k == taps && w == taps;
        parts.push(format!("{sigma}->{k}/{w}"));
    }
    verdict(ok, format!("taps (filter/shadow window): {}", parts.join(", ")))
}

fn c3_sigma_gradient() -> Verdict {
    let start = Instant::now();
    let (scene, gb, mesh) = hemisphere(128);
    let l = scene.to_camera(&world_light(45.0, 20.0));
    let ldm = shadowmap::render_light_depth(&mesh, &l, 256).unwrap();
    let eval = csm::CsmEvaluator::new(&ldm, shadowmap::receivers(&gb, &ldm.frame), DEFAULT_CSM_BIAS);
    let mut ok = true;
    let mut parts = Vec::new();
    for sigma in [3.0, 7.0, 12.0] {
        let r = eval.radius_for(sigma);
        let c = eval.evaluate_with_radius(sigma, r, true);
        let g = c.gradient.unwrap();
        let stats = |h: f64| {
            let p = eval.evaluate_with_radius(sigma + h, r, false);
            let m = eval.evaluate_with_radius(sigma - h, r, false);
            let (mut worst, mut n): (f64, usize) = (0.0, 0);
            for i in 0..g.len() {
                let inside = |v: f64| v > 0.0 && v < 1.0;
                if g[i].abs() <= C3_MIN_GRAD || !(inside(c.visibility[i]) && inside(p.visibility[i]) && inside(m.visibility[i])) {
                    continue;
                }
                let fd = (p.visibility[i] - m.visibility[i]) / (2.0 * h);
                worst = worst.max(((g[i] - fd) / fd).abs());
                n += 1;
            }
            (worst, n)
        };
        let (worst, n) = stats(C3_H);
        let (coarse, _) = stats(0.05);
        ok &= n > 0 && worst < C3_REL_ERROR;
        parts.push(format!("sigma {sigma}: {n} px, max rel {worst:.2e} (h=0.05: {coarse:.2e})"));
    }
    let t = start.elapsed().as_secs_f64();
    ok &= t < C3_SECONDS;
    verdict(ok, format!("{}; {t:.1} s", parts.join("; ")))
}

fn c4_hard_vs_raycast() -> Verdict {
    let (scene, gb, mesh) = hemisphere(256);
    let mut ok = true;
    let mut parts = Vec::new();
    for e in [30.0, 45.0, 60.0] {
        let start = Instant::now();
        let w = world_light(e, 0.0);
        let hard = shadowmap::hard_shadow(&gb, &mesh, &scene.to_camera(&w), 256, DEFAULT_BIAS).unwrap();
        let truth = raycast_visibility(&scene, &w);
        let (mut agree, mut total) = (0usize, 0usize);
        for i in 0..truth.len() {
            if gb.mask()[i] {
                total += 1;
                agree += (hard.visibility[i] == truth[i]) as usize;
            }
        }
        let frac = agree as f64 / total as f64;
        let t = start.elapsed().as_secs_f64();
        ok &= frac >= C4_AGREEMENT && t < C4_SECONDS_PER_DIRECTION;
        parts.push(format!("{e} deg: {:.2}% in {t:.2} s", 100.0 * frac));
    }
    verdict(ok, parts.join(", "))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn vec_rel_error(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm() / b.norm().max(1e-8)
}

fn c5_shading_gradients() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let v = relight_core::shading::VIEW;
    let h = 1e-6;
    // worst relative error: lambert direction, specular direction, intensity
    let mut worst = [0.0f64; 3];
    let mut done = 0;
    while done < C5_CONFIGS {
        let n = random_unit(&mut rng);
        let d = random_unit(&mut rng) * rng.random_range(0.5..2.0);
        let mat = Material { specular: rng.random_range(0.1..1.0), roughness: rng.random_range(0.2..1.0) };
        let intensity = Rgb::new(rng.random_range(0.1..3.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
        // away from the cosine clamps
        let l = d.normalize();
        if n.dot(&l) < 0.1 || n.dot(&v) < 0.1 {
            continue;
        }
        let shapes: [Box<dyn Fn(&Vec3) -> (f64, Vec3)>; 2] =
            [Box::new(|d: &Vec3| lambert_shape(&n, d)), Box::new(|d: &Vec3| specular_shape(&n, d, &v, mat))];
        for (s, shape) in shapes.iter().enumerate() {
            let (value, grad) = shape(&d);
            for c in 0..3 {
                // S_c = I_c * shape, so dS_c/dI_c = shape and dS_c/dd = I_c * grad
                let at = |i: f64| i * shape(&d).0;
                let fd_i = (at(intensity[c] + h) - at(intensity[c] - h)) / (2.0 * h);
                worst[2] = worst[2].max((fd_i - value).abs() / value.abs().max(1e-12));
                let mut fd = Vec3::zeros();
                for k in 0..3 {
                    let (mut p, mut m) = (d, d);
                    p[k] += h;
                    m[k] -= h;
                    fd[k] = intensity[c] * (shape(&p).0 - shape(&m).0) / (2.0 * h);
                }
                worst[s] = worst[s].max(vec_rel_error(&(grad * intensity[c]), &fd));
            }
        }
        done += 1;
    }
    let ok = worst.iter().all(|&w| w < C5_REL_ERROR);
    verdict(
        ok,
        format!(
            "{C5_CONFIGS} configs: max rel err lambert-dir {:.2e}, specular-dir {:.2e}, intensity {:.2e}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn brightest_cone(env: &relight_core::EnvironmentMap) -> Vec3 {
    let cos_r = 15f64.to_radians().cos();
    let texels: Vec<(Vec3, f64)> = (0..env.height())
        .flat_map(|y| (0..env.width()).map(move |x| (x, y)))
        .map(|(x, y)| (env.direction(x, y), env.texel(x, y).mean() * env.texel_solid_angle(y)))
        .collect();
    let mut best = (f64::NEG_INFINITY, Vec3::y());
    for (d, _) in &texels {
        let s: f64 = texels.iter().filter(|(e, _)| e.dot(d) >= cos_r).map(|(_, w)| w).sum();
        if s > best.0 {
            best = (s, *d);
        }
    }
    best.1
}

fn c6_recovery() -> Verdict {
    let env = disk_env(32);
    let truth = brightest_cone(&env);
    let cfg = OptConfig::desk();
    let start = Instant::now();
    let (lights, trace) = match optimize_lights(&env, &cfg) {
        Ok(r) => r,
        Err(e) => return verdict(false, format!("optimization failed: {e}")),
    };
    let desk_seconds = start.elapsed().as_secs_f64();
    let brightest = lights
        .lights()
        .iter()
        .max_by(|a, b| a.intensity.mean().total_cmp(&b.intensity.mean()))
        .unwrap();
    let angle = brightest.direction.dot(&truth).clamp(-1.0, 1.0).acos().to_degrees();
    let drop = 1.0 - trace.final_step2 / trace.step2[0];
    let full_est = full_scale_estimate(&env);
    let ok = angle <= C6_MAX_ANGLE_DEG && drop >= C6_MIN_DROP && desk_seconds < C6_DESK_SECONDS && full_est <= C6_FULL_SECONDS;
    verdict(
        ok,
        format!(
            "angle {angle:.1} deg (<= {C6_MAX_ANGLE_DEG}), step-2 drop {:.1}% (>= 50%), desk run {desk_seconds:.1} s (< {C6_DESK_SECONDS}), \
             full-scale estimate {full_est:.0} s on {} thread(s) (<= {C6_FULL_SECONDS})",
            100.0 * drop,
            rayon::current_num_threads()
        ),
    )
}

/// Setup time plus per-iteration cost times the full iteration counts, measured on short
/// runs of the full-size problem.
fn full_scale_estimate(env: &relight_core::EnvironmentMap) -> f64 {
    let full = OptConfig::full();
    let (k2, k3) = (4, 2);
    let short = OptConfig { iters_step2: k2, iters_step3: k3, ..full.clone() };
    let t0 = Instant::now();
    let problem = Problem::new(env, &short).unwrap();
    let setup = t0.elapsed().as_secs_f64();
    let init = relight_core::lighting::init_uniform(short.n_lights, env, short.sigma0, None).unwrap();
    let t1 = Instant::now();
    let (fitted, ..) = fit_shading(&problem, &init, &short).unwrap();
    let per2 = t1.elapsed().as_secs_f64() / k2 as f64;
    let t2 = Instant::now();
    fit_sigma(&problem, &fitted, &short).unwrap();
    let per3 = t2.elapsed().as_secs_f64() / k3 as f64;
    let est = setup + per2 * full.iters_step2 as f64 + per3 * full.iters_step3 as f64;
    println!("    full scale: setup {setup:.1} s, step 2 {per2:.3} s/iter, step 3 {per3:.2} s/iter");
    est
}

fn sky_env(height: usize) -> relight_core::EnvironmentMap {
    let sun = Vec3::new(-0.3, 0.8, 0.5).normalize();
    let cos_r = 5f64.to_radians().cos();
    relight_core::EnvironmentMap::from_fn(height, |d| {
        let sky = Rgb::new(0.3, 0.45, 0.8) * (0.2 + d.y.max(0.0));
        if d.dot(&sun) >= cos_r {
            sky + Rgb::splat(50.0)
        } else {
            sky
        }
    })
    .unwrap()
}

fn two_disk_env(height: usize) -> relight_core::EnvironmentMap {
    let a = Vec3::new(0.7, 0.5, 0.3).normalize();
    let b = Vec3::new(-0.6, 0.4, -0.6).normalize();
    let cos_r = 12f64.to_radians().cos();
    relight_core::EnvironmentMap::from_fn(height, |d| {
        let mut c = Rgb::splat(0.1);
        if d.dot(&a) >= cos_r {
            c += Rgb::new(8.0, 5.0, 2.0);
        }
        if d.dot(&b) >= cos_r {
            c += Rgb::new(1.5, 3.0, 6.0);
        }
        c
    })
    .unwrap()
}

fn c7_light_count() -> Verdict {
    let envs = [("disk", disk_env(32)), ("sky", sky_env(32)), ("two disks", two_disk_env(32))];
    let mut monotone = 0;
    let mut parts = Vec::new();
    for (name, env) in &envs {
        let mut errs = Vec::new();
        for n in [8, 16, 32] {
            let cfg = OptConfig { n_lights: n, iters_step3: 30, ..OptConfig::desk() };
            let scene = SphereScene::with_resolution(cfg.image_resolution).unwrap();
            let (lights, _) = match optimize_lights(env, &cfg) {
                Ok(r) => r,
                Err(e) => return verdict(false, format!("{name}, N={n}: {e}")),
            };
            let gb = render_gbuffer(&scene).unwrap();
            let cam = lights.rotated(&(scene.to_camera_matrix() * env_rotation(0.0, 0.0)));
            let composed = shadowed_diffuse(&gb, &cam, cfg.shadow_resolution, cfg.csm_bias).unwrap();
            let oracle = render_targets(&scene, env).shadowed_diffuse;
            errs.push(rmse(&composed, &oracle).unwrap());
        }
        let ok = errs[1] <= errs[0] && errs[2] <= errs[1];
        monotone += ok as usize;
        parts.push(format!("{name}: {:.5} / {:.5} / {:.5}", errs[0], errs[1], errs[2]));
    }
    verdict(monotone == envs.len(), format!("RMSE at N = 8/16/32: {}; monotone on {monotone}/3", parts.join("; ")))
}

fn c8_metric_identities() -> Verdict {
    let frame = |k: f64| ImageRgb::from_fn(16, 16, |x, y| Rgb::new(x as f64 / 15.0, y as f64 / 15.0, k));
    let seq: Vec<ImageRgb> = (0..6).map(|i| frame(0.1 * i as f64)).collect();
    let mut ok = true;
    let pr = partial_rmse(&seq, &seq).unwrap();
    ok &= pr == 0.0;
    let a = frame(0.3);
    ok &= rmse(&a, &a).unwrap() == 0.0;
    ok &= (ssim(&a, &a).unwrap() - 1.0).abs() <= C8_TOL;
    let shifted = ImageRgb::from_fn(16, 16, |x, y| *a.get(x, y) + Rgb::splat(0.25));
    ok &= (rmse(&a, &shifted).unwrap() - 0.25).abs() <= C8_TOL;
    let gt = ImageScalar::from_fn(16, 16, |x, y| 1.0 + 0.1 * x as f64 + 0.05 * y as f64);
    let mask = Image::from_fn(16, 16, |x, y| (2..14).contains(&x) && (3..12).contains(&y));
    let mut si = Vec::new();
    for c in [-0.3, 0.2] {
        let pred = ImageScalar::from_fn(16, 16, |x, y| gt.get(x, y) + if *mask.get(x, y) { c } else { 0.0 });
        let v = scale_invariant_l1(&gt, &pred, &mask).unwrap();
        ok &= v.abs() <= C8_TOL;
        si.push(v);
    }
    ok &= LAMBDA_SLOPE == 0.01 && LAMBDA_SIGMA == 0.01;
    verdict(
        ok,
        format!(
            "partial_rmse(s, s) = {pr}, si-l1 at c=-0.3/0.2 = {:.1e}/{:.1e}, lambda_slope {LAMBDA_SLOPE}, lambda_sigma {LAMBDA_SIGMA}",
            si[0], si[1]
        ),
    )
}

fn c9_repulsion() -> Verdict {
    let d = Vec3::new(0.0, 0.0, 1.0);
    let (same, _) = loss_repulsion(&[d, d], 0.65);
    let (anti, _) = loss_repulsion(&[d, -d], 0.65);
    let (fib, _) = loss_repulsion(&uniform_directions(16), 0.65);
    let ok = (same - C9_COINCIDENT).abs() <= C9_TOL && anti == 0.0 && fib == 0.0;
    verdict(ok, format!("coincident {same}, antipodal {anti}, 16-light init {fib}"))
}

/// Output files of one run, keyed by path relative to its output root.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(root) {
        let name = entry.strip_prefix(root).unwrap().display().to_string();
        if !name.ends_with("manifest.json") {
            out.insert(name, std::fs::read(&entry).unwrap());
        }
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let env = write_env(root, &disk_env(16));
    let lights = root.join("lights.json");
    std::fs::write(&lights, LIGHTS).unwrap();
    let cfg = root.join("tiny.toml");
    std::fs::write(&cfg, TINY_CONFIG).unwrap();
    let reference = root.join("reference");
    let o = run(&["render-gt", "--env", s(&env), "--out", s(&reference), "--resolution", "48"]);
    if !o.status.success() {
        return verdict(false, "render-gt failed");
    }
    let gbuffer = reference.join("gbuffer");
    let frames = root.join("frames");
    std::fs::create_dir(&frames).unwrap();
    let base = relight_core::io::read_rgb_image(reference.join("diffuse.exr")).unwrap();
    for i in 0..5 {
        relight_core::io::write_rgb_image(frames.join(format!("{i}.exr")), &base.scaled(0.5 + 0.2 * i as f64)).unwrap();
    }
    let commands: Vec<(&str, Box<dyn Fn(&Path) -> Vec<String>>)> = vec![
        ("approx-lights", Box::new(|o: &Path| {
            let o = o.display();
            vec!["approx-lights".into(), s(&env).into(), "-o".into(), format!("{o}/l.json"), "--config".into(), s(&cfg).into(),
                 "--trace".into(), format!("{o}/t.csv"), "--vis".into(), format!("{o}/v.png")]
        })),
        ("relight", Box::new(|o: &Path| {
            let o = o.display();
            vec!["relight".into(), "--gbuffer".into(), s(&gbuffer).into(), "--lights".into(), s(&lights).into(), "--shadow".into(),
                 "min".into(), "--out".into(), format!("{o}/r.exr"), "--dump-per-light".into(), format!("{o}/per")]
        })),
        ("shadow", Box::new(|o: &Path| {
            let o = o.display();
            vec!["shadow".into(), "--gbuffer".into(), s(&gbuffer).into(), "--lights".into(), s(&lights).into(), "--mode".into(),
                 "csm".into(), "--out".into(), format!("{o}/s.png")]
        })),
        ("render-gt", Box::new(|o: &Path| {
            vec!["render-gt".into(), "--env".into(), s(&env).into(), "--out".into(), format!("{}/gt", o.display()), "--resolution".into(), "48".into()]
        })),
        ("metrics", Box::new(|o: &Path| {
            vec!["metrics".into(), "--gt".into(), s(&frames).into(), "--pred".into(), s(&frames).into(), "-o".into(), format!("{}/m.json", o.display())]
        })),
        ("visualize-lights", Box::new(|o: &Path| {
            vec!["visualize-lights".into(), "--lights".into(), s(&lights).into(), "--env".into(), s(&env).into(), "--out".into(), format!("{}/v.png", o.display())]
        })),
    ];
    let mut failed = Vec::new();
    let mut files = 0;
    for (name, args) in &commands {
        let mut first: Option<BTreeMap<String, Vec<u8>>> = None;
        for (run_id, threads) in [(0, 1), (1, 1), (2, 2), (3, 4)] {
            let out = root.join(format!("{name}-{run_id}"));
            std::fs::create_dir_all(&out).unwrap();
            let a = args(&out);
            let refs: Vec<&str> = a.iter().map(String::as_str).collect();
            let o = run_with_threads(&refs, Some(threads));
            if !o.status.success() {
                failed.push(format!("{name} exited {:?}", o.status.code()));
                break;
            }
            let snap = snapshot(&out);
            match &first {
                None => {
                    files += snap.len();
                    first = Some(snap);
                }
                Some(f) if *f != snap => failed.push(format!("{name} differs at --threads {threads}")),
                Some(_) => {}
            }
        }
    }
    verdict(
        failed.is_empty(),
        if failed.is_empty() {
            format!("6 subcommands × 4 runs (threads 1, 1, 2, 4), {files} output files bitwise identical")
        } else {
            failed.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("1 csm step approximation", c1_csm_step),
        ("2 kernel-size rule", c2_kernel_size),
        ("3 dcsm sigma gradient", c3_sigma_gradient),
        ("4 hard shadow vs ray cast", c4_hard_vs_raycast),
        ("5 shading gradients", c5_shading_gradients),
        ("6 light optimization recovery", c6_recovery),
        ("7 light-count monotonicity", c7_light_count),
        ("8 metric identities", c8_metric_identities),
        ("9 repulsion hinge", c9_repulsion),
        ("10 determinism", c10_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.starts_with(&format!("{p} "))) {
            continue;
        }
        let start = Instant::now();
        let v = std::panic::catch_unwind(f).unwrap_or_else(|_| verdict(false, "panicked"));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failures += (!v.pass) as usize;
        println!("[{tag}] criterion {name}: {} ({:.1} s)", v.detail, start.elapsed().as_secs_f64());
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}
