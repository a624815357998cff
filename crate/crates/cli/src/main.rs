//! `relight` command-line tool.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Preset;

#[derive(Debug, Parser)]
#[command(name = "relight", version, about = "Area-light approximation and soft-shadow relighting")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "RELIGHT_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a fixed-size area-light set to an environment map.
    ApproxLights(ApproxLightsArgs),
    /// Relight a G-buffer with a light set.
    Relight(RelightArgs),
    /// Visibility map of one light.
    Shadow(ShadowArgs),
    /// Ground-truth renders of the hemisphere scene under an environment map.
    RenderGt(RenderGtArgs),
    /// Compare two directories of numbered frames.
    Metrics(MetricsArgs),
    /// Draw a light set over its environment map.
    VisualizeLights(VisualizeArgs),
}

#[derive(Debug, Args)]
pub struct ApproxLightsArgs {
    /// Environment map (.hdr, .exr, .pfm or .png).
    pub env: PathBuf,
    /// Output light-set file.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-iteration loss trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Light visualization over the environment map.
    #[arg(long)]
    pub vis: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    /// TOML file overriding preset values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_lights: Option<usize>,
    #[arg(long)]
    pub iters_step2: Option<usize>,
    #[arg(long)]
    pub iters_step3: Option<usize>,
    #[arg(long)]
    pub lr_max: Option<f64>,
    #[arg(long)]
    pub image_resolution: Option<usize>,
    #[arg(long)]
    pub shadow_resolution: Option<usize>,
    #[arg(long)]
    pub env_height: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderOptions {
    /// Shadow-map resolution.
    #[arg(long, default_value_t = relight_core::shadowmap::DEFAULT_RESOLUTION)]
    pub resolution: usize,
    /// Hard shadow-map depth bias.
    #[arg(long, default_value_t = relight_core::shadowmap::DEFAULT_BIAS)]
    pub bias: f64,
    /// Soft shadow-map depth bias.
    #[arg(long, default_value_t = relight_core::shadowmap::DEFAULT_CSM_BIAS)]
    pub csm_bias: f64,
    /// World-to-camera rotation (`camera.json` from render-gt) applied to the light directions.
    #[arg(long)]
    pub camera: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RelightArgs {
    #[arg(long)]
    pub gbuffer: PathBuf,
    #[arg(long)]
    pub lights: PathBuf,
    #[arg(long, default_value = "csm")]
    pub shadow: relight_core::pipeline::ShadowMode,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for per-light diffuse, specular and shadow maps.
    #[arg(long)]
    pub dump_per_light: Option<PathBuf>,
    #[command(flatten)]
    pub render: RenderOptions,
}

#[derive(Debug, Args)]
pub struct ShadowArgs {
    #[arg(long)]
    pub gbuffer: PathBuf,
    #[arg(long)]
    pub lights: PathBuf,
    /// Index of the light in the set.
    #[arg(long, default_value_t = 0)]
    pub light: usize,
    #[arg(long, default_value = "csm")]
    pub mode: relight_core::pipeline::ShadowMode,
    /// Output map; PNG is written as 16-bit gray.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub render: RenderOptions,
}

#[derive(Debug, Args)]
pub struct RenderGtArgs {
    #[arg(long)]
    pub env: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 256)]
    pub resolution: usize,
    /// The environment is box-filtered to this height first.
    #[arg(long, default_value_t = 64)]
    pub env_height: usize,
    /// Environment rotation in degrees.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lon: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lat: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Report file; printed to stdout when absent.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub lights: PathBuf,
    #[arg(long)]
    pub env: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Rectangle side per unit sigma, in pixels; defaults to width / 128.
    #[arg(long)]
    pub px_per_sigma: Option<f64>,
}

/// Failure classes mapped to exit codes 1 and 2.
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::ApproxLights(a) => commands::approx_lights(a),
        Command::Relight(a) => commands::relight(a),
        Command::Shadow(a) => commands::shadow(a),
        Command::RenderGt(a) => commands::render_gt(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::VisualizeLights(a) => commands::visualize_lights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            report(&e);
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            report(&e);
            ExitCode::from(2)
        }
    }
}

/// Prints the error chain, skipping causes already quoted by an outer message.
fn report(e: &anyhow::Error) {
    let mut text = String::new();
    for cause in e.chain() {
        let c = cause.to_string();
        if !text.contains(&c) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&c);
        }
    }
    eprintln!("error: {text}");
}
