//! Bundled parameter sets for the figure reproductions.

use anyhow::{anyhow, Result};
use fiberlink::config::RunConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub description: String,
    pub config: RunConfig,
    #[serde(default)]
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub attenuations: Vec<f64>,
    #[serde(default)]
    pub cooperativities: Vec<f64>,
    #[serde(default)]
    pub p_out: Vec<f64>,
    #[serde(default)]
    pub loss2_values: Vec<f64>,
    /// Required advantage of AP over P₁ for the L_max scan.
    #[serde(default)]
    pub margin: Option<f64>,
}

const PRESETS: [(&str, &str); 10] = [
    ("3", include_str!("../presets/3.json")),
    ("4a", include_str!("../presets/4a.json")),
    ("4b", include_str!("../presets/4b.json")),
    ("5", include_str!("../presets/5.json")),
    ("6a", include_str!("../presets/6a.json")),
    ("6b", include_str!("../presets/6b.json")),
    ("6c", include_str!("../presets/6c.json")),
    ("6d", include_str!("../presets/6d.json")),
    ("7", include_str!("../presets/7.json")),
    ("9", include_str!("../presets/9.json")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

pub fn load(name: &str) -> Result<Preset> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| anyhow!(fiberlink::Error::Config(format!("unknown preset `{name}`; known: {}", names().join(", ")))))?;
    serde_json::from_str(text).map_err(|e| anyhow!(fiberlink::Error::Config(format!("preset {name}: {e}"))))
}
