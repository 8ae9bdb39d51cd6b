//! Greedy removal baseline: retrain, drop the positives that share a
//! positive leaf with negatives, repeat until the tree commits no false
//! positive.
//!
//! Removing only the positives that the tree misses can stall with a tree
//! whose FN is already zero but whose FP is not (a duplicated point with more
//! positive than negative weight). Emptying the positives out of every
//! positive leaf that holds a negative always changes that leaf's vote on
//! refit, so each round removes at least one positive and the loop ends
//! after at most `n_p + 1` fits. Negatives are never removed, so the final
//! tree has no false positive on the original data either.

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::cart::{self, ConfusionMatrix, DecisionTree, NodeKind, Presorted, TrainConfig};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// One removal round. Costs are unweighted misclassification counts on the
/// current (reduced) set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalRound {
    pub round: usize,
    /// Misses and false alarms of the fitted tree before removal.
    pub missed_before: u64,
    pub false_alarms_before: u64,
    pub cost_before: u64,
    /// Cost of the same tree on the set after removal.
    pub cost_after: u64,
    pub removed: usize,
    /// `cost_after / cost_before`.
    pub r: f64,
    /// `cost_before / previous round's cost_after`; absent in round 1.
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rounds: Vec<RemovalRound>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if num == 0 && den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ConvergenceTrace {
    pub fn total_removed(&self) -> usize {
        self.rounds.iter().map(|r| r.removed).sum()
    }

    /// `round,J_pre,J_post,removed,r_k,q_k` table; `q_k` is empty for round 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,J_pre,J_post,removed,r_k,q_k\n");
        for r in &self.rounds {
            let q = r.q.map(|q| q.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.round, r.cost_before, r.cost_after, r.removed, r.r, q
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RemovalResult {
    pub model: DecisionTree,
    /// Positives still in the training set, indexed like
    /// [`LabeledDataset::positive_indices`].
    pub retained: FixedBitSet,
    pub trace: ConvergenceTrace,
    pub fits: usize,
    /// Final tree on the original dataset.
    pub full_confusion: ConfusionMatrix,
}

pub fn run_removal(ds: &LabeledDataset, cart_cfg: &TrainConfig) -> Result<RemovalResult> {
    cart_cfg.validate()?;
    if ds.n_neg() == 0 {
        return Err(Error::NoNegatives);
    }
    let positives = ds.positive_indices();
    let presorted = Presorted::new(ds);
    let mut weights = ds.weights().to_vec();
    let mut trace = ConvergenceTrace::default();
    let mut previous_after: Option<u64> = None;
    let mut fits = 0;
    loop {
        let model = cart::fit_weighted(ds, &weights, cart_cfg, Some(&presorted))?;
        fits += 1;
        let leaves: Vec<usize> = ds.rows().map(|x| model.leaf_index_unchecked(x)).collect();
        let mut missed = 0;
        let mut false_alarms = 0;
        for i in (0..ds.len()).filter(|&i| weights[i] > 0) {
            match (ds.label(i), leaf_label(&model, leaves[i])) {
                (Label::Positive, Label::Negative) => missed += 1,
                (Label::Negative, Label::Positive) => false_alarms += 1,
                _ => {}
            }
        }
        if false_alarms == 0 {
            let mut retained = FixedBitSet::with_capacity(positives.len());
            for (j, &i) in positives.iter().enumerate() {
                retained.set(j, weights[i] > 0);
            }
            let full_confusion = cart::evaluate(&model, ds)?;
            return Ok(RemovalResult {
                model,
                retained,
                trace,
                fits,
                full_confusion,
            });
        }

        let offending: Vec<bool> = model
            .nodes()
            .iter()
            .map(|n| {
                matches!(
                    n.kind,
                    NodeKind::Leaf {
                        label: Label::Positive,
                        negative,
                        ..
                    } if negative > 0
                )
            })
            .collect();
        let mut removed = 0;
        let mut removed_cost = 0;
        for &i in &positives {
            if weights[i] > 0 && offending[leaves[i]] {
                weights[i] = 0;
                removed += 1;
                // Positives in a positive leaf are caught, so they carry no cost.
                if leaf_label(&model, leaves[i]) == Label::Negative {
                    removed_cost += 1;
                }
            }
        }
        let cost_before = missed + false_alarms;
        let cost_after = cost_before - removed_cost;
        trace.rounds.push(RemovalRound {
            round: trace.rounds.len() + 1,
            missed_before: missed,
            false_alarms_before: false_alarms,
            cost_before,
            cost_after,
            removed,
            r: ratio(cost_after, cost_before),
            q: previous_after.map(|prev| ratio(cost_before, prev)),
        });
        previous_after = Some(cost_after);
    }
}

fn leaf_label(tree: &DecisionTree, leaf: usize) -> Label {
    match tree.node(leaf).kind {
        NodeKind::Leaf { label, .. } => label,
        NodeKind::Split { .. } => unreachable!("leaf index points at a leaf"),
    }
}
