//! Layered run configuration: command-line flags override the optional
//! JSON config file, which overrides built-in defaults. The effective
//! values land in `<out>/manifest.json`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::{read_to_string, write_json};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    /// scene | play
    pub unit: Option<String>,
    /// train/val/test fractions
    pub ratios: Option<(f64, f64, f64)>,
    #[serde(default)]
    pub embed: EmbedOverrides,
    #[serde(default)]
    pub scorer: ScorerOverrides,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbedOverrides {
    pub dim: Option<usize>,
    pub feature_dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub temperature: Option<f64>,
    pub batch_segments: Option<usize>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerOverrides {
    pub window: Option<usize>,
    pub hidden: Option<usize>,
    pub vocab_dim: Option<usize>,
    pub token_dim: Option<usize>,
    pub radius: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, Vec<String>> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let body = read_to_string(path)?;
        serde_json::from_str(&body).map_err(|e| vec![format!("config {}: {e}", path.display())])
    }
}

/// Provenance record for one command run. Deliberately free of
/// timestamps and host details so reruns stay byte-identical.
#[derive(Serialize)]
pub struct Manifest<T: Serialize> {
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub inputs: BTreeMap<&'static str, String>,
    pub effective: T,
}

impl<T: Serialize> Manifest<T> {
    pub fn write(&self, out_dir: &Path) -> Result<(), Vec<String>> {
        write_json(&out_dir.join("manifest.json"), self)
    }
}
