//! Weighted CART decision trees.
//!
//! Splits are axis-aligned: an internal node sends `x[feature] < threshold`
//! left and everything else right. Candidate thresholds are midpoints between
//! consecutive distinct sorted values of the samples reaching the node, and
//! sample multiplicities act exactly like repeated rows. Leaves predict the
//! weighted majority class; a tie predicts [`Label::Negative`] so an
//! ambiguous region never rejects traffic.

mod fit;
mod tree;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

pub use fit::{fit, fit_weighted, Presorted};
pub use tree::{DecisionTree, NodeKind, TreeNode, TREE_FORMAT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Maximum number of split levels; `None` grows until another rule stops.
    pub max_depth: Option<usize>,
    /// Minimum total sample weight on each side of a split.
    pub min_samples_leaf: u64,
    /// A split must lower weighted impurity, normalised by the total training
    /// weight, by at least this much.
    pub min_impurity_decrease: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_depth: None,
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("max_depth must be positive".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be positive".into()));
        }
        if !(self.min_impurity_decrease >= 0.0) || !self.min_impurity_decrease.is_finite() {
            return Err(Error::InvalidConfig(
                "min_impurity_decrease must be a finite nonnegative number".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted Gini impurity `1 - sum(p_c^2)` of a pair of class weights.
pub fn gini(negative: f64, positive: f64) -> Result<f64> {
    let total = negative + positive;
    if !(negative >= 0.0 && positive >= 0.0) || total <= 0.0 {
        return Err(Error::ZeroCounts);
    }
    let (pn, pp) = (negative / total, positive / total);
    Ok(1.0 - (pn * pn + pp * pp))
}

/// Weighted confusion counts. Positive means attack.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    #[serde(rename = "TN")]
    pub tn: u64,
    #[serde(rename = "TP")]
    pub tp: u64,
    #[serde(rename = "FN")]
    pub fn_: u64,
    #[serde(rename = "FP")]
    pub fp: u64,
}

impl ConfusionMatrix {
    pub fn record(&mut self, actual: Label, predicted: Label, weight: u64) {
        match (actual, predicted) {
            (Label::Negative, Label::Negative) => self.tn += weight,
            (Label::Positive, Label::Positive) => self.tp += weight,
            (Label::Positive, Label::Negative) => self.fn_ += weight,
            (Label::Negative, Label::Positive) => self.fp += weight,
        }
    }

    pub fn total(&self) -> u64 {
        self.tn + self.tp + self.fn_ + self.fp
    }

    pub fn errors(&self) -> u64 {
        self.fn_ + self.fp
    }

    pub fn from_predictions(ds: &LabeledDataset, predicted: &[Label], weights: &[u64]) -> Self {
        let mut cm = ConfusionMatrix::default();
        for (i, &p) in predicted.iter().enumerate() {
            if weights[i] > 0 {
                cm.record(ds.label(i), p, weights[i]);
            }
        }
        cm
    }
}

/// Route every sample of `ds` through `tree`.
pub fn predict_all(tree: &DecisionTree, ds: &LabeledDataset) -> Result<Vec<Label>> {
    tree.check_dimension(ds.n_features())?;
    Ok(ds.rows().map(|x| tree.predict_unchecked(x)).collect())
}

/// Confusion matrix of `tree` over `ds`, weighted by sample multiplicity.
pub fn evaluate(tree: &DecisionTree, ds: &LabeledDataset) -> Result<ConfusionMatrix> {
    evaluate_weighted(tree, ds, ds.weights())
}

/// Like [`evaluate`] with per-sample weights overriding the dataset's own;
/// weight 0 excludes a sample.
pub fn evaluate_weighted(
    tree: &DecisionTree,
    ds: &LabeledDataset,
    weights: &[u64],
) -> Result<ConfusionMatrix> {
    tree.check_dimension(ds.n_features())?;
    if weights.len() != ds.len() {
        return Err(Error::Schema(format!(
            "{} weights for {} samples",
            weights.len(),
            ds.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (i, &w) in weights.iter().enumerate() {
        if w > 0 {
            cm.record(ds.label(i), tree.predict_unchecked(ds.row(i)), w);
        }
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    #[test]
    fn gini_values() {
        assert_eq!(gini(10.0, 0.0).unwrap(), 0.0);
        assert_eq!(gini(5.0, 5.0).unwrap(), 0.5);
        assert!((gini(3.0, 1.0).unwrap() - 0.375).abs() < 1e-15);
        assert!(matches!(gini(0.0, 0.0), Err(Error::ZeroCounts)));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            max_depth: Some(0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            min_samples_leaf: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            min_impurity_decrease: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hand_built_four_sample_confusion() {
        // Predictions from a depth-1 tree at 1.5: 0,1 -> negative, 2,3 -> positive.
        // Labels chosen so each cell gets exactly one sample.
        let ds = LabeledDataset::from_samples(
            1,
            vec![
                Sample::new(vec![0.0], Label::Negative),
                Sample::new(vec![1.0], Label::Positive),
                Sample::new(vec![2.0], Label::Negative),
                Sample::new(vec![3.0], Label::Positive),
            ],
        )
        .unwrap();
        let tree = DecisionTree::stump(1, 0, 1.5, Label::Negative, Label::Positive);
        let cm = evaluate(&tree, &ds).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tn: 1,
                tp: 1,
                fn_: 1,
                fp: 1
            }
        );
        assert_eq!(cm.total(), 4);
    }

    #[test]
    fn single_negative_leaf_misses_every_positive() {
        let ds = LabeledDataset::from_samples(
            1,
            vec![
                Sample::new(vec![0.0], Label::Negative),
                Sample::new(vec![1.0], Label::Positive).with_weight(3),
            ],
        )
        .unwrap();
        let tree = DecisionTree::leaf(1, Label::Negative);
        let cm = evaluate(&tree, &ds).unwrap();
        assert_eq!(cm.tp, 0);
        assert_eq!(cm.fn_, 3);
    }

    #[test]
    fn evaluate_dimension_mismatch() {
        let ds = LabeledDataset::from_samples(2, vec![Sample::new(vec![0.0, 1.0], Label::Negative)])
            .unwrap();
        let tree = DecisionTree::leaf(1, Label::Negative);
        assert!(matches!(
            evaluate(&tree, &ds),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }
}
