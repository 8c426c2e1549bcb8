//! Flat experiment configuration.
//!
//! A config file is a TOML table with the keys of [`ExperimentConfig`]; every
//! key is optional and command-line flags override file values. Unknown keys
//! are rejected so that typos surface as validation errors.

use std::path::{Path, PathBuf};

use fdmap::Divergence;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Either `"kl,sl"` or `["kl", "sl"]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NameList {
    One(String),
    Many(Vec<String>),
}

impl NameList {
    pub fn names(&self) -> Vec<String> {
        let parts: Vec<&str> = match self {
            NameList::One(s) => s.split(',').collect(),
            NameList::Many(v) => v.iter().flat_map(|s| s.split(',')).collect(),
        };
        parts.into_iter().map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Supervised,
    Unsupervised,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub divergence: Option<NameList>,
    pub arch: Option<Arch>,
    pub tx_measure: Option<f64>,
    pub support_box: Option<[f64; 2]>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub steps_per_epoch: Option<usize>,
    pub lr: Option<f64>,
    pub lr_final_fraction: Option<f64>,
    pub optimizer: Option<String>,
    pub seed: Option<u64>,
    pub dropout: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub channel: Option<String>,
    pub snr: Option<String>,
    pub n: Option<usize>,
    pub task: Option<String>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub normalize: Option<bool>,
    pub out_dir: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {}", e.message().trim())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("{} ({})", msg, path.display())),
            other => other,
        })
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        overlay_fields!(self, top; divergence, arch, tx_measure, support_box, batch_size, epochs,
            steps_per_epoch, lr, lr_final_fraction, optimizer, seed, dropout, hidden, channel, snr, n,
            task, n_train, n_test, normalize, out_dir);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    /// Resolved divergence list, or `default` when unset.
    pub fn divergences(&self, default: &[Divergence]) -> Result<Vec<Divergence>, CliError> {
        match &self.divergence {
            None => Ok(default.to_vec()),
            Some(list) => {
                let names = list.names();
                if names.is_empty() {
                    return Err(CliError::field("divergence", "empty list"));
                }
                names.iter().map(|n| n.parse::<Divergence>().map_err(CliError::from)).collect()
            }
        }
    }

    /// Reject an explicit architecture that the command cannot use.
    pub fn require_arch(&self, needed: Arch) -> Result<(), CliError> {
        match self.arch {
            Some(a) if a != needed => Err(CliError::field(
                "arch",
                format!("this command trains {} networks", if needed == Arch::Supervised { "supervised" } else { "unsupervised" }),
            )),
            _ => Ok(()),
        }
    }

    /// Apply optimiser overrides to a training configuration.
    pub fn apply_training(&self, train: &mut fdmap::train::TrainConfig) -> Result<(), CliError> {
        if let Some(v) = self.batch_size {
            train.batch_size = v;
        }
        if let Some(v) = self.epochs {
            train.epochs = v;
        }
        if let Some(v) = self.steps_per_epoch {
            train.steps_per_epoch = v;
        }
        if let Some(v) = self.lr {
            train.lr = v;
        }
        if let Some(v) = self.lr_final_fraction {
            train.lr_final_fraction = v;
        }
        if let Some(name) = &self.optimizer {
            train.optimizer = name.parse().map_err(CliError::from)?;
        }
        train.validate().map_err(CliError::from)
    }
}

/// SHA-256 over the canonical JSON form of `settings` (object keys sorted),
/// so the hash depends on values only, never on the order fields were given.
pub fn config_hash<T: Serialize>(command: &str, settings: &T) -> Result<String, CliError> {
    let value = serde_json::json!({ "command": command, "settings": serde_json::to_value(settings)? });
    let canonical = serde_json::to_string(&value)?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reordered_files_parse_identically() {
        let a = ExperimentConfig::from_toml("divergence = \"sl\"\nlr = 0.001\nseed = 3\n").unwrap();
        let b = ExperimentConfig::from_toml("seed = 3\nlr = 0.001\ndivergence = \"sl\"\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(config_hash("toy", &a).unwrap(), config_hash("toy", &b).unwrap());
        let c = ExperimentConfig::from_toml("seed = 4\nlr = 0.001\ndivergence = \"sl\"\n").unwrap();
        assert_ne!(config_hash("toy", &a).unwrap(), config_hash("toy", &c).unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("learning_rate = 0.1\n").unwrap_err();
        assert!(err.to_string().contains("learning_rate"), "{err}");
    }

    #[test]
    fn overlay_prefers_top() {
        let base = ExperimentConfig { seed: Some(1), lr: Some(0.1), ..Default::default() };
        let top = ExperimentConfig { seed: Some(2), ..Default::default() };
        let merged = base.overlay(top);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.lr, Some(0.1));
    }

    #[test]
    fn divergence_lists() {
        let cfg = ExperimentConfig::from_toml("divergence = [\"kl\", \"sl,gan\"]\n").unwrap();
        assert_eq!(cfg.divergences(&[]).unwrap(), vec![Divergence::Kl, Divergence::Sl, Divergence::Gan]);
        let bad = ExperimentConfig::from_toml("divergence = \"kl,xx\"\n").unwrap();
        let err = bad.divergences(&[]).unwrap_err().to_string();
        assert!(err.contains("`divergence`") && err.contains("xx"), "{err}");
    }
}
