//! Run manifest: model config plus run options, assembled from defaults,
//! an optional config file (JSON or TOML) and command-line overrides.
//! Flags win over file values. Every report echoes the manifest so a run
//! can be reproduced from its output alone.

use std::path::Path;

use fam_core::models::{FieldSelection, ModelConfig, ReductionMode};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ManifestError {
    Io(std::io::Error),
    Parse(String),
}

impl std::fmt::Display for ManifestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ManifestError::Io(e) => write!(f, "cannot read config file: {e}"),
            ManifestError::Parse(e) => write!(f, "cannot parse config file: {e}"),
        }
    }
}

/// Optional-field mirror of the config file. Keys: m, alpha, B, k, rho,
/// K, hbar, selection, mode.
#[derive(Debug, Default, Deserialize)]
pub struct ConfigFile {
    pub m: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub k: Option<f64>,
    pub rho: Option<f64>,
    #[serde(rename = "K")]
    pub trap: Option<f64>,
    pub hbar: Option<f64>,
    pub selection: Option<FieldSelection>,
    pub mode: Option<ReductionMode>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path).map_err(ManifestError::Io)?;
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text).map_err(|e| ManifestError::Parse(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| ManifestError::Parse(e.to_string()))
        }
    }
}

/// Fully resolved run description, embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub config: ModelConfig,
    pub selection: FieldSelection,
    pub mode: ReductionMode,
    pub seed: u64,
}

impl RunManifest {
    /// CSV comment header: one `# key=value` line per field.
    pub fn csv_header(&self) -> String {
        let c = &self.config;
        let selection = match self.selection {
            FieldSelection::Both => "both",
            FieldSelection::E1Only => "e1",
            FieldSelection::E2Only => "e2",
        };
        let mode = match self.mode {
            ReductionMode::Full => "full",
            ReductionMode::Reduced => "reduced",
        };
        format!(
            "# m={} alpha={} B={} k={} rho={} K={} hbar={}\n# selection={selection} mode={mode} seed={}\n",
            c.m, c.alpha, c.b, c.k, c.rho, c.trap, c.hbar, self.seed
        )
    }
}
