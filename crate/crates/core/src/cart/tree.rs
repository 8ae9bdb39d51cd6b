use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{default_feature_names, Label};
use crate::error::{Error, Result};

pub const TREE_FORMAT: &str = "zfp-tree";
const TREE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeKind {
    Split {
        feature: usize,
        #[serde(with = "threshold_repr")]
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: Label,
        negative: u64,
        positive: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    #[serde(flatten)]
    pub kind: NodeKind,
}

/// Binary decision tree stored as a node list in preorder (root first, left
/// subtree before right), so leaf ids increase from left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    n_features: usize,
    feature_names: Vec<String>,
    nodes: Vec<TreeNode>,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    format: String,
    version: u32,
    n_features: usize,
    feature_names: Vec<String>,
    nodes: Vec<TreeNode>,
}

/// Leaf label for weighted class counts; ties go to the negative class.
pub(crate) fn majority(negative: u64, positive: u64) -> Label {
    if positive > negative {
        Label::Positive
    } else {
        Label::Negative
    }
}

impl DecisionTree {
    pub fn from_nodes(
        n_features: usize,
        feature_names: Vec<String>,
        nodes: Vec<TreeNode>,
    ) -> Result<Self> {
        let tree = DecisionTree {
            n_features,
            feature_names,
            nodes,
        };
        tree.validate()?;
        Ok(tree)
    }

    /// Single-leaf tree predicting `label` everywhere.
    pub fn leaf(n_features: usize, label: Label) -> Self {
        let (negative, positive) = match label {
            Label::Negative => (1, 0),
            Label::Positive => (0, 1),
        };
        DecisionTree {
            n_features,
            feature_names: default_feature_names(n_features),
            nodes: vec![TreeNode {
                id: 0,
                parent: None,
                kind: NodeKind::Leaf {
                    label,
                    negative,
                    positive,
                },
            }],
        }
    }

    /// Depth-1 tree splitting `feature` at `threshold`.
    pub fn stump(n_features: usize, feature: usize, threshold: f64, left: Label, right: Label) -> Self {
        let leaf = |id, label| {
            let (negative, positive) = match label {
                Label::Negative => (1, 0),
                Label::Positive => (0, 1),
            };
            TreeNode {
                id,
                parent: Some(0),
                kind: NodeKind::Leaf {
                    label,
                    negative,
                    positive,
                },
            }
        };
        DecisionTree {
            n_features,
            feature_names: default_feature_names(n_features),
            nodes: vec![
                TreeNode {
                    id: 0,
                    parent: None,
                    kind: NodeKind::Split {
                        feature,
                        threshold,
                        left: 1,
                        right: 2,
                    },
                },
                leaf(1, left),
                leaf(2, right),
            ],
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_ids().count()
    }

    /// Leaf ids from left to right.
    pub fn leaf_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .map(|n| n.id)
    }

    pub fn depth(&self) -> usize {
        self.leaf_ids()
            .map(|mut id| {
                let mut d = 0;
                while let Some(p) = self.nodes[id].parent {
                    id = p;
                    d += 1;
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn check_dimension(&self, got: usize) -> Result<()> {
        if got != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got,
            });
        }
        Ok(())
    }

    /// Id of the leaf that `x` routes to.
    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        self.check_dimension(x.len())?;
        Ok(self.leaf_index_unchecked(x))
    }

    pub(crate) fn leaf_index_unchecked(&self, x: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id].kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if x[feature] < threshold { left } else { right },
                NodeKind::Leaf { .. } => return id,
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.check_dimension(x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Label {
        match self.nodes[self.leaf_index_unchecked(x)].kind {
            NodeKind::Leaf { label, .. } => label,
            NodeKind::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(msg));
        if self.feature_names.len() != self.n_features {
            return bad(format!(
                "{} feature names for {} features",
                self.feature_names.len(),
                self.n_features
            ));
        }
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return bad(format!("node at position {i} has id {}", node.id));
            }
        }
        if self.nodes[0].parent.is_some() {
            return bad("root node has a parent".into());
        }
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(id) = stack.pop() {
            match &self.nodes[id].kind {
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.n_features {
                        return bad(format!("node {id} splits on feature {feature}"));
                    }
                    if threshold.is_nan() {
                        return bad(format!("node {id} has a NaN threshold"));
                    }
                    for &child in [left, right] {
                        if child >= n || seen[child] {
                            return bad(format!("node {id} has invalid child {child}"));
                        }
                        if self.nodes[child].parent != Some(id) {
                            return bad(format!("node {child} does not link back to parent {id}"));
                        }
                        seen[child] = true;
                        stack.push(child);
                    }
                }
                NodeKind::Leaf {
                    label,
                    negative,
                    positive,
                } => {
                    if *label != majority(*negative, *positive) {
                        return bad(format!("leaf {id} label disagrees with its counts"));
                    }
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return bad(format!("node {orphan} is unreachable"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TreeFile = serde_json::from_str(text)?;
        if file.format != TREE_FORMAT || file.version != TREE_VERSION {
            return Err(Error::Model(format!(
                "unsupported tree format {} v{}",
                file.format, file.version
            )));
        }
        Self::from_nodes(file.n_features, file.feature_names, file.nodes)
    }

    fn file(&self) -> TreeFile {
        TreeFile {
            format: TREE_FORMAT.into(),
            version: TREE_VERSION,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            nodes: self.nodes.clone(),
        }
    }

    /// SHA-256 of the compact serialized form.
    pub fn digest(&self) -> String {
        let compact = serde_json::to_vec(&self.file()).expect("tree serializes");
        hex::encode(Sha256::digest(&compact))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// JSON numbers cannot hold infinities, which appear as thresholds when a
/// feature column contains them. Those are written as strings.
mod threshold_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(v.to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_routes_by_strict_less_than() {
        let t = DecisionTree::stump(1, 0, 1.5, Label::Negative, Label::Positive);
        assert_eq!(t.predict(&[1.49]).unwrap(), Label::Negative);
        assert_eq!(t.predict(&[1.5]).unwrap(), Label::Positive);
        assert!(t.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn json_round_trip_with_infinite_threshold() {
        let t = DecisionTree::stump(2, 1, f64::INFINITY, Label::Negative, Label::Positive);
        let back = DecisionTree::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.digest(), t.digest());
    }

    #[test]
    fn corrupted_models_rejected() {
        let t = DecisionTree::stump(1, 0, 1.5, Label::Negative, Label::Positive);
        let json = t.to_json().unwrap();
        assert!(DecisionTree::from_json(&json.replace("\"left\": 1", "\"left\": 7")).is_err());
        assert!(DecisionTree::from_json(&json.replace("\"feature\": 0", "\"feature\": 3")).is_err());
        assert!(DecisionTree::from_json(&json.replace("zfp-tree", "other")).is_err());
        assert!(DecisionTree::from_json("{ not json").is_err());
        let flipped = json.replacen("\"label\": \"negative\"", "\"label\": \"positive\"", 1);
        assert!(DecisionTree::from_json(&flipped).is_err());
    }

    #[test]
    fn leaf_ids_left_to_right() {
        let t = DecisionTree::stump(1, 0, 0.0, Label::Negative, Label::Positive);
        assert_eq!(t.leaf_ids().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(t.depth(), 1);
        assert_eq!(DecisionTree::leaf(3, Label::Negative).depth(), 0);
    }
}
