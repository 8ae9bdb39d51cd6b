use std::path::Path;

use serde::{Deserialize, Serialize};
use zfp_core::cart::{ConfusionMatrix, DecisionTree, TREE_FORMAT};
use zfp_core::dataset::CodeMap;

use crate::{CliError, Result};

pub const MODEL_FORMAT: &str = "zfp-model";
const MODEL_VERSION: u32 = 1;

/// A trained tree plus what is needed to apply and audit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub manifest_digest: String,
    /// Category codes used when the training data was loaded.
    pub codes: CodeMap,
    pub retained_positives: u64,
    pub training_confusion: ConfusionMatrix,
    pub tree: serde_json::Value,
}

impl ModelFile {
    pub fn new(
        tree: &DecisionTree,
        codes: CodeMap,
        manifest_digest: String,
        retained_positives: u64,
        training_confusion: ConfusionMatrix,
    ) -> Result<Self> {
        Ok(ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            manifest_digest,
            codes,
            retained_positives,
            training_confusion,
            tree: serde_json::from_str(&tree.to_json()?)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

pub struct LoadedModel {
    pub tree: DecisionTree,
    pub codes: Option<CodeMap>,
    /// Present for model files; bare trees carry no training record.
    pub training_confusion: Option<ConfusionMatrix>,
}

/// Read a model file or a bare tree file.
pub fn load_model(path: &Path) -> Result<LoadedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    match value.get("format").and_then(|f| f.as_str()) {
        Some(MODEL_FORMAT) => {
            let file: ModelFile = serde_json::from_value(value)?;
            if file.version != MODEL_VERSION {
                return Err(CliError::Usage(format!("unsupported model version {}", file.version)));
            }
            Ok(LoadedModel {
                tree: DecisionTree::from_json(&file.tree.to_string())?,
                codes: Some(file.codes),
                training_confusion: Some(file.training_confusion),
            })
        }
        Some(TREE_FORMAT) => Ok(LoadedModel {
            tree: DecisionTree::from_json(&text)?,
            codes: None,
            training_confusion: None,
        }),
        _ => Err(CliError::Usage(format!("{} is not a model or tree file", path.display()))),
    }
}
