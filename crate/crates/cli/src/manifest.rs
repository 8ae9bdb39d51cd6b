use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zfp_core::cart::TrainConfig;
use zfp_core::dataset::DatasetManifest;
use zfp_core::swarm::SwarmConfig;

use crate::{CliError, Result};

/// Everything that determines a run's results. Worker count and output
/// locations are deliberately absent, so equal digests mean equal outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInputs {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub dataset: DatasetManifest,
    pub subsample: Option<usize>,
    pub seed: u64,
    pub cart: Option<TrainConfig>,
    pub swarm: Option<SwarmConfig>,
    /// Command-specific settings such as a cost grid.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

impl RunInputs {
    pub fn new(command: &str, dataset: DatasetManifest, subsample: Option<usize>, seed: u64) -> Self {
        RunInputs {
            tool: "zfp".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            dataset,
            subsample,
            seed,
            cart: None,
            swarm: None,
            extra: serde_json::Value::Null,
        }
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub digest: String,
    pub inputs: RunInputs,
    pub workers: Option<usize>,
    pub artifacts: BTreeMap<String, Artifact>,
}

impl RunManifest {
    pub fn new(inputs: RunInputs, workers: Option<usize>) -> Self {
        RunManifest {
            digest: inputs.digest(),
            inputs,
            workers,
            artifacts: BTreeMap::new(),
        }
    }

    /// Write an artifact under `dir` and record its hash.
    pub fn write_artifact(&mut self, dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.artifacts.insert(
            name.into(),
            Artifact {
                path: path.clone(),
                sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            },
        );
        Ok(path)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
