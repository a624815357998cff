#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relight_core::{io, EnvironmentMap, Rgb, Vec3};

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_relight"))
}

pub fn run(args: &[&str]) -> Output {
    run_with_threads(args, None)
}

pub fn run_with_threads(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(bin());
    cmd.env_remove("RELIGHT_THREADS");
    if let Some(t) = threads {
        cmd.arg("--threads").arg(t.to_string());
    }
    cmd.args(args).output().expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Dim sky with one bright disk.
pub fn disk_env(height: usize) -> EnvironmentMap {
    let c = Vec3::new(0.4, 0.7, -0.5).normalize();
    let cos_r = 15f64.to_radians().cos();
    EnvironmentMap::from_fn(height, |d| if d.dot(&c) >= cos_r { Rgb::splat(10.0) } else { Rgb::splat(0.05) }).unwrap()
}

pub fn write_env(dir: &Path, env: &EnvironmentMap) -> PathBuf {
    let p = dir.join("env.hdr");
    io::save_env_map(&p, env).unwrap();
    p
}

pub const LIGHTS: &str = r#"{"n_lights": 2, "lights": [
  {"intensity": [1.0, 0.9, 0.8], "direction": [0.6, 0.0, 0.8], "sigma": 5.0},
  {"intensity": [0.4, 0.5, 0.6], "direction": [0.0, 0.6, 0.8], "sigma": 15.0}
]}"#;

pub const TINY_CONFIG: &str = "iters_step2 = 6\niters_step3 = 2\nimage_resolution = 24\nshadow_resolution = 32\nenv_height = 8\nrotations = [[0, 0], [0, 90]]\n";

/// G-buffer and ground truth from `render-gt`, plus a light file.
pub fn scene(dir: &Path, resolution: usize) -> (PathBuf, PathBuf) {
    let env = write_env(dir, &disk_env(16));
    let gt = dir.join("gt");
    let o = run(&["render-gt", "--env", s(&env), "--out", s(&gt), "--resolution", &resolution.to_string()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lights = dir.join("lights.json");
    std::fs::write(&lights, LIGHTS).unwrap();
    (gt, lights)
}
