//! Environment-map area-light approximation and differentiable soft-shadow relighting.

pub mod buffer;
pub mod envmap;
pub mod error;
pub mod filter;
pub mod gbuffer;
pub mod io;
pub mod lighting;
pub mod lightopt;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod shading;
pub mod shadowmap;

pub use buffer::{Image, ImageRgb, ImageScalar, Rgb, Vec3};
pub use envmap::EnvironmentMap;
pub use error::{Error, Result};
pub use gbuffer::GBuffer;
pub use lighting::{AreaLight, LightSet};
