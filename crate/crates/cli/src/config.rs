use std::path::Path;

use anyhow::{bail, Context, Result};
use relight_core::lightopt::OptConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Full,
    Desk,
}

impl Preset {
    pub fn config(self) -> OptConfig {
        match self {
            Preset::Full => OptConfig::full(),
            Preset::Desk => OptConfig::desk(),
        }
    }
}

/// Keys present in the TOML file replace the preset's values; absent keys keep them.
pub fn layered(preset: Preset, file: Option<&Path>) -> Result<OptConfig> {
    let base = preset.config();
    let Some(path) = file else {
        return Ok(base);
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut merged = serde_json::to_value(&base)?;
    let obj = merged.as_object_mut().expect("config serializes to an object");
    for (k, v) in table {
        if !obj.contains_key(&k) {
            bail!("{}: unknown key `{k}`", path.display());
        }
        obj.insert(k, serde_json::to_value(v)?);
    }
    serde_json::from_value(merged).with_context(|| format!("{}: invalid value", path.display()))
}
