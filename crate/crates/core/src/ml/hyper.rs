//! Per-dataset training hyper-parameters.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DpeError, Result};
use crate::ml::dataset::DatasetName;

/// Hyper-parameters shipped with the crate.
pub const DEFAULT_TRAINING: &str = include_str!("../../../../config/training.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparameters {
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingTable {
    pub default: Hyperparameters,
    #[serde(default)]
    pub datasets: BTreeMap<String, Hyperparameters>,
}

impl Default for TrainingTable {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TRAINING).expect("shipped training table must parse")
    }
}

impl TrainingTable {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let t: Self = toml::from_str(s).map_err(|e| DpeError::Config(e.to_string()))?;
        for (name, h) in std::iter::once(("default", &t.default))
            .chain(t.datasets.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if name != "default" {
                name.parse::<DatasetName>()?;
            }
            if !(h.learning_rate.is_finite() && h.learning_rate > 0.0) {
                return Err(DpeError::Config(format!(
                    "{name}: learning_rate must be positive, got {}",
                    h.learning_rate
                )));
            }
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| DpeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn get(&self, name: DatasetName) -> Hyperparameters {
        self.datasets.get(name.slug()).copied().unwrap_or(self.default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_covers_every_dataset() {
        let t = TrainingTable::default();
        for d in DatasetName::ALL {
            assert!(t.datasets.contains_key(d.slug()));
        }
    }

    #[test]
    fn unknown_dataset_rejected() {
        let s = "[default]\nepochs = 1\nlearning_rate = 0.1\n[datasets.mnist]\nepochs = 1\nlearning_rate = 0.1\n";
        assert!(TrainingTable::from_toml_str(s).is_err());
    }

    #[test]
    fn fallback_to_default() {
        let s = "[default]\nepochs = 7\nlearning_rate = 0.1\n";
        let t = TrainingTable::from_toml_str(s).unwrap();
        assert_eq!(t.get(DatasetName::Wine).epochs, 7);
    }
}
