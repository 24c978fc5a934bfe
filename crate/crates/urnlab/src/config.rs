//! Run configuration: JSON config files and the resolved record written
//! with every report.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Report encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Flag values of one run. A config file holds the same keys; every report
/// embeds the resolved instance, minus the output path, which can be fed
/// back through `--config`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poisson: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmax: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_point_n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

impl RunConfig {
    /// Reads a config file, or the `config` block of an emitted JSON report.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        if let Some(block) = value.get_mut("config") {
            value = block.take();
        }
        serde_json::from_value(value).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Fills every unset field from `fallback`.
    pub fn or(self, fallback: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: self.$f.or(fallback.$f)),* } };
        }
        pick!(
            command, suite, experiment, model, n, t, poisson, rmax, epsilon, delta, replicates, seed, s_grid, n_grid, levels, q,
            lambda, two_point_n, n0, tau, ci, profile, output, format
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let flags = RunConfig { seed: Some(7), ..Default::default() };
        let file = RunConfig { seed: Some(3), n: Some(10), ..Default::default() };
        let merged = flags.or(file);
        assert_eq!(merged.seed, Some(7));
        assert_eq!(merged.n, Some(10));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 1}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 1, "s_grid": [0.5, 1.0]}"#).unwrap();
        assert_eq!(c.s_grid, Some(vec![0.5, 1.0]));
    }
}
