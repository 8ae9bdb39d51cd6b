use super::tree::{majority, DecisionTree, NodeKind, TreeNode};
use super::TrainConfig;
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Per-feature row orders of a dataset, sorted by value then row index.
///
/// Sorting dominates the cost of a fit on large datasets, so callers that
/// refit many reweighted copies of one dataset (the swarm does) compute this
/// once and filter it per fit.
#[derive(Debug, Clone)]
pub struct Presorted {
    n_rows: usize,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(ds: &LabeledDataset) -> Self {
        let all: Vec<u32> = (0..ds.len() as u32).collect();
        Presorted {
            n_rows: ds.len(),
            order: (0..ds.n_features()).map(|f| sorted_by_feature(ds, f, &all)).collect(),
        }
    }
}

fn sorted_by_feature(ds: &LabeledDataset, f: usize, rows: &[u32]) -> Vec<u32> {
    let mut v = rows.to_vec();
    v.sort_by(|&a, &b| {
        ds.value(a as usize, f)
            .total_cmp(&ds.value(b as usize, f))
            .then(a.cmp(&b))
    });
    v
}

/// Fit a tree using the dataset's own sample weights.
pub fn fit(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<DecisionTree> {
    fit_weighted(ds, ds.weights(), cfg, None)
}

/// Threshold strictly above `lo` and at most `hi`, as close to the midpoint
/// as floating point allows.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if lo < m && m <= hi {
        m
    } else {
        hi
    }
}

/// `W * gini` for class weights summing to `W`.
fn weighted_impurity(neg: f64, pos: f64) -> f64 {
    let w = neg + pos;
    if w == 0.0 {
        0.0
    } else {
        w - (neg * neg + pos * pos) / w
    }
}

struct Task {
    parent: Option<(usize, bool)>,
    depth: usize,
    orders: Vec<Vec<u32>>,
}

struct BestSplit {
    feature: usize,
    position: usize,
    lo: f64,
    hi: f64,
    score: f64,
}

/// Fit a tree with explicit per-sample weights; weight 0 leaves a sample out.
///
/// Splits are chosen greedily by lowest weighted Gini of the two children.
/// Ties keep the lowest feature index, then the lowest threshold.
pub fn fit_weighted(
    ds: &LabeledDataset,
    weights: &[u64],
    cfg: &TrainConfig,
    presorted: Option<&Presorted>,
) -> Result<DecisionTree> {
    cfg.validate()?;
    if weights.len() != ds.len() {
        return Err(Error::Schema(format!(
            "{} weights for {} samples",
            weights.len(),
            ds.len()
        )));
    }
    let active: Vec<u32> = (0..ds.len() as u32).filter(|&i| weights[i as usize] > 0).collect();
    if active.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = ds.n_features();
    let names = ds.feature_names().to_vec();

    if d == 0 {
        let (neg, pos) = class_weights(ds, weights, &active);
        return DecisionTree::from_nodes(0, names, vec![leaf_node(0, None, neg, pos)]);
    }

    let orders: Vec<Vec<u32>> = match presorted {
        Some(p) if p.n_rows == ds.len() && p.order.len() == d => p
            .order
            .iter()
            .map(|o| o.iter().copied().filter(|&i| weights[i as usize] > 0).collect())
            .collect(),
        Some(_) => {
            return Err(Error::Schema("presorted order does not match dataset".into()));
        }
        None => (0..d).map(|f| sorted_by_feature(ds, f, &active)).collect(),
    };

    let total_weight: f64 = active.iter().map(|&i| weights[i as usize] as f64).sum();
    let min_leaf = cfg.min_samples_leaf as f64;
    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut goes_left = vec![false; ds.len()];
    let mut stack = vec![Task {
        parent: None,
        depth: 0,
        orders,
    }];

    while let Some(task) = stack.pop() {
        let id = nodes.len();
        if let Some((parent, is_right)) = task.parent {
            if let NodeKind::Split { left, right, .. } = &mut nodes[parent].kind {
                if is_right {
                    *right = id;
                } else {
                    *left = id;
                }
            }
        }
        let (neg, pos) = class_weights(ds, weights, &task.orders[0]);
        let node_weight = (neg + pos) as f64;
        let stop = neg == 0
            || pos == 0
            || cfg.max_depth.is_some_and(|m| task.depth >= m)
            || node_weight < 2.0 * min_leaf;
        let best = if stop {
            None
        } else {
            best_split(ds, weights, &task.orders, min_leaf)
        };
        let parent_score = weighted_impurity(neg as f64, pos as f64);
        let best = best.filter(|b| {
            (parent_score - b.score) / total_weight >= cfg.min_impurity_decrease - 1e-12
        });
        let Some(best) = best else {
            nodes.push(leaf_node(id, task.parent.map(|p| p.0), neg, pos));
            continue;
        };

        let threshold = midpoint(best.lo, best.hi);
        let split_order = &task.orders[best.feature];
        for &i in &split_order[..=best.position] {
            goes_left[i as usize] = true;
        }
        let mut left_orders = Vec::with_capacity(d);
        let mut right_orders = Vec::with_capacity(d);
        for order in &task.orders {
            let (l, r): (Vec<u32>, Vec<u32>) = order.iter().partition(|&&i| goes_left[i as usize]);
            left_orders.push(l);
            right_orders.push(r);
        }
        for &i in &split_order[..=best.position] {
            goes_left[i as usize] = false;
        }
        nodes.push(TreeNode {
            id,
            parent: task.parent.map(|p| p.0),
            kind: NodeKind::Split {
                feature: best.feature,
                threshold,
                left: usize::MAX,
                right: usize::MAX,
            },
        });
        let depth = task.depth + 1;
        drop(task);
        stack.push(Task {
            parent: Some((id, true)),
            depth,
            orders: right_orders,
        });
        stack.push(Task {
            parent: Some((id, false)),
            depth,
            orders: left_orders,
        });
    }
    DecisionTree::from_nodes(d, names, nodes)
}

fn leaf_node(id: usize, parent: Option<usize>, negative: u64, positive: u64) -> TreeNode {
    TreeNode {
        id,
        parent,
        kind: NodeKind::Leaf {
            label: majority(negative, positive),
            negative,
            positive,
        },
    }
}

fn class_weights(ds: &LabeledDataset, weights: &[u64], rows: &[u32]) -> (u64, u64) {
    let mut neg = 0;
    let mut pos = 0;
    for &i in rows {
        let w = weights[i as usize];
        if ds.label(i as usize).is_positive() {
            pos += w;
        } else {
            neg += w;
        }
    }
    (neg, pos)
}

fn best_split(
    ds: &LabeledDataset,
    weights: &[u64],
    orders: &[Vec<u32>],
    min_leaf: f64,
) -> Option<BestSplit> {
    let (neg_total, pos_total) = class_weights(ds, weights, &orders[0]);
    let (neg_total, pos_total) = (neg_total as f64, pos_total as f64);
    let tolerance = 1e-12 * (neg_total + pos_total);
    let mut best: Option<BestSplit> = None;
    for (f, order) in orders.iter().enumerate() {
        let mut left_neg = 0.0;
        let mut left_pos = 0.0;
        for pos in 0..order.len().saturating_sub(1) {
            let i = order[pos] as usize;
            let w = weights[i] as f64;
            if ds.label(i).is_positive() {
                left_pos += w;
            } else {
                left_neg += w;
            }
            let lo = ds.value(i, f);
            let hi = ds.value(order[pos + 1] as usize, f);
            if !(lo < hi) {
                continue;
            }
            let left_w = left_neg + left_pos;
            let right_w = neg_total + pos_total - left_w;
            if left_w < min_leaf || right_w < min_leaf {
                continue;
            }
            let score = weighted_impurity(left_neg, left_pos)
                + weighted_impurity(neg_total - left_neg, pos_total - left_pos);
            if best.as_ref().is_none_or(|b| score < b.score - tolerance) {
                best = Some(BestSplit {
                    feature: f,
                    position: pos,
                    lo,
                    hi,
                    score,
                });
            }
        }
    }
    best
}
