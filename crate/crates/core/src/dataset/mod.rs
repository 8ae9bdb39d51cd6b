//! Labeled datasets: storage, loaders, stratified subsampling and synthetic
//! constellations.
//!
//! Samples are stored row-major in a single flat buffer. Labels are binary,
//! with [`Label::Positive`] meaning "attack" and [`Label::Negative`] meaning
//! "normal traffic". Each sample carries an integer multiplicity that behaves
//! exactly like physically repeating the row.

mod codes;
mod loaders;
mod synth;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use codes::CodeMap;
pub use loaders::{load_csv, load_kdd, load_powergrid, CsvOptions, KDD_FEATURE_NAMES};
pub use synth::{synth_constellation, ConstellationSpec, GaussianComponent, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Negative => -1.0,
            Label::Positive => 1.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    /// Ordinal code assigned by first occurrence, see [`CodeMap`].
    Categorical,
}

/// One owned sample, used when building datasets by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub label: Label,
    pub weight: u64,
}

impl Sample {
    pub fn new(x: Vec<f64>, label: Label) -> Self {
        Sample { x, label, weight: 1 }
    }

    pub fn with_weight(mut self, weight: u64) -> Self {
        self.weight = weight;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<Label>,
    weights: Vec<u64>,
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    codes: CodeMap,
    n_pos: usize,
    n_neg: usize,
}

impl LabeledDataset {
    /// Build a dataset from a flat row-major feature buffer.
    pub fn from_parts(
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        features: Vec<f64>,
        labels: Vec<Label>,
        weights: Vec<u64>,
        codes: CodeMap,
    ) -> Result<Self> {
        let d = feature_names.len();
        if feature_kinds.len() != d {
            return Err(Error::Schema(format!(
                "{} feature kinds for {} feature names",
                feature_kinds.len(),
                d
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Schema(format!("duplicate feature name {dup:?}")));
        }
        let n = labels.len();
        if features.len() != n * d {
            return Err(Error::Schema(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                n,
                d
            )));
        }
        if weights.len() != n {
            return Err(Error::Schema(format!(
                "{} weights for {} samples",
                weights.len(),
                n
            )));
        }
        if weights.contains(&0) {
            return Err(Error::Schema("sample weights must be at least 1".into()));
        }
        if let Some(pos) = features.iter().position(|v| v.is_nan()) {
            return Err(Error::Schema(format!(
                "NaN feature value at row {}, feature {}",
                pos / d.max(1),
                pos % d.max(1)
            )));
        }
        let n_pos = labels.iter().filter(|l| l.is_positive()).count();
        Ok(LabeledDataset {
            n_features: d,
            features,
            labels,
            weights,
            feature_names,
            feature_kinds,
            codes,
            n_pos,
            n_neg: n - n_pos,
        })
    }

    /// Build a numeric dataset from owned samples. Feature names default to
    /// `x0, x1, ...`.
    pub fn from_samples(n_features: usize, samples: Vec<Sample>) -> Result<Self> {
        let mut features = Vec::with_capacity(samples.len() * n_features);
        let mut labels = Vec::with_capacity(samples.len());
        let mut weights = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: s.x.len(),
                });
            }
            features.extend_from_slice(&s.x);
            labels.push(s.label);
            weights.push(s.weight);
        }
        Self::from_parts(
            default_feature_names(n_features),
            vec![FeatureKind::Numeric; n_features],
            features,
            labels,
            weights,
            CodeMap::default(),
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_pos(&self) -> usize {
        self.n_pos
    }

    pub fn n_neg(&self) -> usize {
        self.n_neg
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn weight(&self, i: usize) -> u64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn codes(&self) -> &CodeMap {
        &self.codes
    }

    pub fn sample(&self, i: usize) -> Sample {
        Sample {
            x: self.row(i).to_vec(),
            label: self.labels[i],
            weight: self.weights[i],
        }
    }

    /// Indices of positive samples in dataset order.
    pub fn positive_indices(&self) -> Vec<usize> {
        self.indices_of(Label::Positive)
    }

    /// Indices of negative samples in dataset order.
    pub fn negative_indices(&self) -> Vec<usize> {
        self.indices_of(Label::Negative)
    }

    fn indices_of(&self, label: Label) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    /// Total multiplicity of positives and negatives.
    pub fn weighted_counts(&self) -> (u64, u64) {
        let mut pos = 0;
        let mut neg = 0;
        for (l, w) in self.labels.iter().zip(&self.weights) {
            match l {
                Label::Positive => pos += w,
                Label::Negative => neg += w,
            }
        }
        (pos, neg)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let labels: Vec<Label> = indices.iter().map(|&i| self.labels[i]).collect();
        let n_pos = labels.iter().filter(|l| l.is_positive()).count();
        LabeledDataset {
            n_features: self.n_features,
            features,
            n_neg: labels.len() - n_pos,
            n_pos,
            labels,
            weights: indices.iter().map(|&i| self.weights[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            codes: self.codes.clone(),
        }
    }

    /// Copy without the named feature columns.
    pub fn drop_features(&self, names: &[String]) -> Result<Self> {
        for name in names {
            if !self.feature_names.contains(name) {
                return Err(Error::MissingColumn(name.clone()));
            }
        }
        let keep: Vec<usize> = (0..self.n_features)
            .filter(|&f| !names.contains(&self.feature_names[f]))
            .collect();
        let mut features = Vec::with_capacity(self.len() * keep.len());
        for i in 0..self.len() {
            let row = self.row(i);
            features.extend(keep.iter().map(|&f| row[f]));
        }
        let mut codes = self.codes.clone();
        codes.retain(|col| !names.iter().any(|n| n == col));
        LabeledDataset::from_parts(
            keep.iter().map(|&f| self.feature_names[f].clone()).collect(),
            keep.iter().map(|&f| self.feature_kinds[f]).collect(),
            features,
            self.labels.clone(),
            self.weights.clone(),
            codes,
        )
    }

    /// Stratified subsample of `n` rows, deterministic for a fixed seed.
    ///
    /// The positive share is `round(n * n_p / N)`, so each class is within one
    /// sample of its proportional allotment. Selected rows keep their
    /// original relative order.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        let total = self.len();
        if n > total {
            return Err(Error::SubsampleTooLarge {
                requested: n,
                available: total,
            });
        }
        if n == 0 {
            return Err(Error::InvalidConfig("subsample size must be positive".into()));
        }
        let want_pos = ((n as f64) * (self.n_pos as f64) / (total as f64)).round() as usize;
        let want_pos = want_pos.min(self.n_pos).max(n.saturating_sub(self.n_neg));
        let want_neg = n - want_pos;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = self.positive_indices();
        let neg = self.negative_indices();
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pos.len(), want_pos)
            .into_iter()
            .map(|k| pos[k])
            .chain(
                rand::seq::index::sample(&mut rng, neg.len(), want_neg)
                    .into_iter()
                    .map(|k| neg[k]),
            )
            .collect();
        chosen.sort_unstable();
        Ok(self.select(&chosen))
    }

    /// Summary written next to every output that consumed this dataset.
    pub fn manifest(&self, source: impl Into<String>, sha256: impl Into<String>) -> DatasetManifest {
        let (w_pos, w_neg) = self.weighted_counts();
        DatasetManifest {
            source: source.into(),
            sha256: sha256.into(),
            n_samples: self.len(),
            n_pos: self.n_pos,
            n_neg: self.n_neg,
            weighted_pos: w_pos,
            weighted_neg: w_neg,
            feature_names: self.feature_names.clone(),
            feature_kinds: self.feature_kinds.clone(),
            codes: self.codes.clone(),
        }
    }

    /// SHA-256 over the encoded content (features, labels, weights, names).
    pub fn content_digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_features as u64).to_le_bytes());
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for v in &self.features {
            h.update(v.to_bits().to_le_bytes());
        }
        for (l, w) in self.labels.iter().zip(&self.weights) {
            h.update([l.is_positive() as u8]);
            h.update(w.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: String,
    pub sha256: String,
    pub n_samples: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub weighted_pos: u64,
    pub weighted_neg: u64,
    pub feature_names: Vec<String>,
    pub feature_kinds: Vec<FeatureKind>,
    pub codes: CodeMap,
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
