use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinal codes for categorical columns.
///
/// Each column maps to the list of distinct values in order of first
/// occurrence; a value's code is its position in that list. Values not seen
/// before are appended, so a map loaded from disk keeps every existing code
/// stable when reused on new data.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CodeMap {
    columns: BTreeMap<String, Vec<String>>,
}

impl CodeMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Code for `value` in `column`, assigning the next code if unseen.
    pub fn encode(&mut self, column: &str, value: &str) -> f64 {
        let values = self.columns.entry(column.to_string()).or_default();
        match values.iter().position(|v| v == value) {
            Some(code) => code as f64,
            None => {
                values.push(value.to_string());
                (values.len() - 1) as f64
            }
        }
    }

    /// Keep only columns for which `keep` holds.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.columns.retain(|col, _| keep(col));
    }

    pub fn code(&self, column: &str, value: &str) -> Option<usize> {
        self.columns.get(column)?.iter().position(|v| v == value)
    }

    pub fn decode(&self, column: &str, code: usize) -> Option<&str> {
        self.columns.get(column)?.get(code).map(String::as_str)
    }

    pub fn column(&self, column: &str) -> Option<&[String]> {
        self.columns.get(column).map(Vec::as_slice)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
