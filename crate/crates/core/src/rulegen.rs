//! Compile a decision tree into firewall rules.
//!
//! Each positive leaf becomes one REJECT rule whose conjunction is the
//! root-to-leaf path reduced to the tightest bound per feature and
//! direction. Leaves partition the feature space, so the rules are pairwise
//! disjoint and their order does not matter; anything unmatched is allowed.
//! The inverted form (ACCEPT rules from negative leaves over a default deny)
//! is built the same way.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cart::{DecisionTree, NodeKind};
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    /// `x[f] < t`, the left branch of a split.
    Lt,
    /// `x[f] >= t`, the right branch.
    Ge,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Lt => "<",
            Op::Ge => ">=",
        }
    }

    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Op::Lt => value < threshold,
            Op::Ge => value >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: usize,
    pub name: String,
    pub op: Op,
    pub threshold: f64,
}

impl Predicate {
    pub fn holds(&self, x: &[f64]) -> bool {
        self.op.holds(x[self.feature], self.threshold)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Allow,
    Reject,
}

impl Action {
    fn rule_keyword(self) -> &'static str {
        match self {
            Action::Allow => "ACCEPT",
            Action::Reject => "REJECT",
        }
    }

    fn default_keyword(self) -> &'static str {
        match self {
            Action::Allow => "ALLOW",
            Action::Reject => "DENY",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Allow => "ALLOW",
            Action::Reject => "REJECT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub predicates: Vec<Predicate>,
    pub action: Action,
}

impl Rule {
    pub fn matches(&self, x: &[f64]) -> bool {
        self.predicates.iter().all(|p| p.holds(x))
    }

    /// Per-feature `(lower, upper)` bounds; `lower` is inclusive, `upper`
    /// exclusive.
    fn bounds(&self, n_features: usize) -> Vec<(Option<f64>, Option<f64>)> {
        let mut b = vec![(None, None); n_features];
        for p in &self.predicates {
            let (lo, hi) = &mut b[p.feature];
            match p.op {
                Op::Ge => *lo = Some(lo.map_or(p.threshold, |l: f64| l.max(p.threshold))),
                Op::Lt => *hi = Some(hi.map_or(p.threshold, |h: f64| h.min(p.threshold))),
            }
        }
        b
    }
}

/// Which leaves become rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Polarity {
    /// REJECT rules from positive leaves, default ALLOW.
    #[default]
    RejectRules,
    /// ACCEPT rules from negative leaves, default DENY.
    AcceptRules,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub n_features: usize,
    pub feature_names: Vec<String>,
    pub rules: Vec<Rule>,
    pub default_action: Action,
    /// Digest of the tree the rules were compiled from.
    pub source_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisjointReport {
    pub disjoint: bool,
    pub overlapping: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Machine,
}

fn intersect(
    a: &[(Option<f64>, Option<f64>)],
    b: &[(Option<f64>, Option<f64>)],
) -> Vec<(Option<f64>, Option<f64>)> {
    a.iter()
        .zip(b)
        .map(|(&(l1, h1), &(l2, h2))| {
            let lo = match (l1, l2) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            };
            let hi = match (h1, h2) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            };
            (lo, hi)
        })
        .collect()
}

fn is_empty_region(bounds: &[(Option<f64>, Option<f64>)]) -> bool {
    bounds.iter().any(|&(lo, hi)| match (lo, hi) {
        (_, Some(h)) if h == f64::NEG_INFINITY => true,
        (Some(l), Some(h)) => l >= h,
        _ => false,
    })
}

/// Default-allow ruleset with one REJECT rule per positive leaf.
pub fn extract_rules(tree: &DecisionTree) -> RuleSet {
    extract_rules_with(tree, Polarity::RejectRules)
}

pub fn extract_rules_with(tree: &DecisionTree, polarity: Polarity) -> RuleSet {
    let (target, action, default_action) = match polarity {
        Polarity::RejectRules => (Label::Positive, Action::Reject, Action::Allow),
        Polarity::AcceptRules => (Label::Negative, Action::Allow, Action::Reject),
    };
    let names = tree.feature_names();
    let mut rules = Vec::new();
    for leaf in tree.leaf_ids() {
        let NodeKind::Leaf { label, .. } = tree.node(leaf).kind else {
            continue;
        };
        if label != target {
            continue;
        }
        // Walk up to the root, then replay the path downwards.
        let mut path = Vec::new();
        let mut child = leaf;
        while let Some(parent) = tree.node(child).parent {
            if let NodeKind::Split {
                feature,
                threshold,
                left,
                ..
            } = tree.node(parent).kind
            {
                let op = if child == left { Op::Lt } else { Op::Ge };
                path.push((feature, op, threshold));
            }
            child = parent;
        }
        path.reverse();

        let mut order: Vec<usize> = Vec::new();
        let mut bounds: Vec<(Option<f64>, Option<f64>)> = vec![(None, None); tree.n_features()];
        for &(f, op, t) in &path {
            if !order.contains(&f) {
                order.push(f);
            }
            let (lo, hi) = &mut bounds[f];
            match op {
                Op::Ge => *lo = Some(lo.map_or(t, |l: f64| l.max(t))),
                Op::Lt => *hi = Some(hi.map_or(t, |h: f64| h.min(t))),
            }
        }
        if is_empty_region(&bounds) {
            continue;
        }
        let mut predicates = Vec::new();
        for f in order {
            let (lo, hi) = bounds[f];
            for (bound, op) in [(lo, Op::Ge), (hi, Op::Lt)] {
                if let Some(threshold) = bound {
                    predicates.push(Predicate {
                        feature: f,
                        name: names[f].clone(),
                        op,
                        threshold,
                    });
                }
            }
        }
        rules.push(Rule { predicates, action });
    }
    RuleSet {
        n_features: tree.n_features(),
        feature_names: names.to_vec(),
        rules,
        default_action,
        source_digest: tree.digest(),
    }
}

impl RuleSet {
    /// First matching rule's action, or the default.
    pub fn apply(&self, x: &[f64]) -> Result<Action> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self
            .rules
            .iter()
            .find(|r| r.matches(x))
            .map_or(self.default_action, |r| r.action))
    }

    /// Pairwise check that no two rules can match the same point.
    pub fn check_disjoint(&self) -> DisjointReport {
        let bounds: Vec<_> = self.rules.iter().map(|r| r.bounds(self.n_features)).collect();
        let mut overlapping = Vec::new();
        for i in 0..bounds.len() {
            for j in i + 1..bounds.len() {
                if !is_empty_region(&intersect(&bounds[i], &bounds[j])) {
                    overlapping.push((i, j));
                }
            }
        }
        DisjointReport {
            disjoint: overlapping.is_empty(),
            overlapping,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Machine => self.render_machine(),
        }
    }

    fn render_text(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            let clauses: Vec<String> = rule
                .predicates
                .iter()
                .map(|p| format!("{}{}{}", p.name, p.op.symbol(), p.threshold))
                .collect();
            let cond = if clauses.is_empty() { "true".to_string() } else { clauses.join(" & ") };
            out.push_str(&format!(
                "IF {} then {}\n",
                cond,
                rule.action.rule_keyword()
            ));
        }
        out.push_str(&format!("# default: {}\n", self.default_action.default_keyword()));
        out
    }

    fn render_machine(&self) -> String {
        let mut out = String::from("# zfp-rules 1\n");
        out.push_str(&format!("# source {}\n", self.source_digest));
        out.push_str(&format!(
            "# features {}\n",
            serde_json::to_string(&self.feature_names).expect("strings serialize")
        ));
        out.push_str(&format!("# default {}\n", self.default_action.default_keyword()));
        for rule in &self.rules {
            let clauses: Vec<String> = rule
                .predicates
                .iter()
                .map(|p| format!("{}{}{}", escape(&p.name), p.op.symbol(), p.threshold))
                .collect();
            let body = if clauses.is_empty() { "*".to_string() } else { clauses.join("&") };
            out.push_str(&format!("{} {}\n", rule.action.rule_keyword(), body));
        }
        out
    }

    /// Parse the machine format produced by [`RuleSet::render`].
    pub fn parse_machine(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::RuleParse { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header = |prefix: &str| -> Result<String> {
            match lines.next() {
                Some((n, l)) => l
                    .strip_prefix(prefix)
                    .map(str::to_string)
                    .ok_or_else(|| err(n, format!("expected {prefix:?}"))),
                None => Err(err(0, format!("missing header {prefix:?}"))),
            }
        };
        if header("# zfp-rules ")? != "1" {
            return Err(err(1, "unsupported rules version".into()));
        }
        let source_digest = header("# source ")?;
        let feature_names: Vec<String> = serde_json::from_str(&header("# features ")?)
            .map_err(|e| err(3, format!("feature list: {e}")))?;
        let default_action = match header("# default ")?.as_str() {
            "ALLOW" => Action::Allow,
            "DENY" => Action::Reject,
            other => return Err(err(4, format!("unknown default {other:?}"))),
        };
        let mut rules = Vec::new();
        for (n, line) in lines {
            if line.is_empty() {
                continue;
            }
            let (keyword, body) = line
                .split_once(' ')
                .ok_or_else(|| err(n, "expected an action and a conjunction".into()))?;
            let action = match keyword {
                "REJECT" => Action::Reject,
                "ACCEPT" => Action::Allow,
                other => return Err(err(n, format!("unknown action {other:?}"))),
            };
            let clauses: Vec<&str> = if body == "*" { Vec::new() } else { body.split('&').collect() };
            let predicates = clauses
                .into_iter()
                .map(|clause| {
                    let (name, op, value) = if let Some(pos) = clause.find(">=") {
                        (&clause[..pos], Op::Ge, &clause[pos + 2..])
                    } else if let Some(pos) = clause.find('<') {
                        (&clause[..pos], Op::Lt, &clause[pos + 1..])
                    } else {
                        return Err(err(n, format!("no operator in {clause:?}")));
                    };
                    let name = unescape(name).ok_or_else(|| err(n, format!("bad escape in {name:?}")))?;
                    let feature = feature_names
                        .iter()
                        .position(|f| *f == name)
                        .ok_or_else(|| err(n, format!("unknown feature {name:?}")))?;
                    let threshold: f64 = value
                        .parse()
                        .map_err(|_| err(n, format!("bad threshold {value:?}")))?;
                    if threshold.is_nan() {
                        return Err(err(n, "NaN threshold".into()));
                    }
                    Ok(Predicate {
                        feature,
                        name,
                        op,
                        threshold,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rules.push(Rule { predicates, action });
        }
        Ok(RuleSet {
            n_features: feature_names.len(),
            feature_names,
            rules,
            default_action,
            source_digest,
        })
    }
}

const ESCAPED: &[char] = &['%', '&', '<', '>', '=', ' ', '\t', '\n', '\r', '#'];

fn escape(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for c in name.chars() {
        if ESCAPED.contains(&c) {
            out.push_str(&format!("%{:02X}", c as u32));
        } else {
            out.push(c);
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '%' {
            let hex: String = chars.by_ref().take(2).collect();
            out.push(char::from(u8::from_str_radix(&hex, 16).ok()?));
        } else {
            out.push(c);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cart::{fit, TrainConfig, TreeNode};
    use crate::dataset::{default_feature_names, LabeledDataset, Sample};
    use proptest::prelude::*;

    fn stump() -> DecisionTree {
        DecisionTree::stump(1, 0, 1.5, Label::Negative, Label::Positive)
    }

    #[test]
    fn negative_leaf_gives_empty_ruleset() {
        let rs = extract_rules(&DecisionTree::leaf(3, Label::Negative));
        assert!(rs.rules.is_empty());
        assert_eq!(rs.default_action, Action::Allow);
        assert_eq!(rs.apply(&[1.0, 2.0, 3.0]).unwrap(), Action::Allow);
        assert_eq!(rs.render(Format::Text), "# default: ALLOW\n");
    }

    #[test]
    fn positive_root_leaf_rejects_everything() {
        let rs = extract_rules(&DecisionTree::leaf(2, Label::Positive));
        assert_eq!(rs.apply(&[0.0, 0.0]).unwrap(), Action::Reject);
        assert_eq!(rs.render(Format::Text), "IF true then REJECT\n# default: ALLOW\n");
        let text = rs.render(Format::Machine);
        assert!(text.ends_with("REJECT *\n"));
        assert_eq!(RuleSet::parse_machine(&text).unwrap(), rs);
    }

    #[test]
    fn stump_gives_one_rule() {
        let rs = extract_rules(&stump());
        assert_eq!(rs.rules.len(), 1);
        assert_eq!(
            rs.rules[0].predicates,
            vec![Predicate {
                feature: 0,
                name: "x0".into(),
                op: Op::Ge,
                threshold: 1.5
            }]
        );
        assert_eq!(rs.apply(&[2.0]).unwrap(), Action::Reject);
        assert_eq!(rs.apply(&[1.4999]).unwrap(), Action::Allow);
        assert!(rs.apply(&[1.0, 2.0]).is_err());
        assert_eq!(
            rs.render(Format::Text),
            "IF x0>=1.5 then REJECT\n# default: ALLOW\n"
        );
    }

    fn chain_tree() -> DecisionTree {
        // x3 < 5 -> (x3 < 2 -> positive | negative) | negative
        let leaf = |id, parent, label: Label| TreeNode {
            id,
            parent: Some(parent),
            kind: NodeKind::Leaf {
                label,
                negative: (label == Label::Negative) as u64,
                positive: (label == Label::Positive) as u64,
            },
        };
        let split = |id, parent, threshold, left, right| TreeNode {
            id,
            parent,
            kind: NodeKind::Split {
                feature: 3,
                threshold,
                left,
                right,
            },
        };
        DecisionTree::from_nodes(
            4,
            default_feature_names(4),
            vec![
                split(0, None, 5.0, 1, 4),
                split(1, Some(0), 2.0, 2, 3),
                leaf(2, 1, Label::Positive),
                leaf(3, 1, Label::Negative),
                leaf(4, 0, Label::Negative),
            ],
        )
        .unwrap()
    }

    #[test]
    fn path_bounds_are_tightened() {
        let rs = extract_rules(&chain_tree());
        assert_eq!(rs.rules.len(), 1);
        assert_eq!(rs.rules[0].predicates.len(), 1);
        assert_eq!(rs.rules[0].predicates[0].op, Op::Lt);
        assert_eq!(rs.rules[0].predicates[0].threshold, 2.0);
    }

    #[test]
    fn overlap_detection() {
        let pred = |t| Predicate {
            feature: 0,
            name: "x0".into(),
            op: Op::Ge,
            threshold: t,
        };
        let mut rs = extract_rules(&DecisionTree::leaf(1, Label::Negative));
        rs.rules = vec![
            Rule {
                predicates: vec![pred(0.0)],
                action: Action::Reject,
            },
            Rule {
                predicates: vec![pred(1.0)],
                action: Action::Reject,
            },
        ];
        let report = rs.check_disjoint();
        assert!(!report.disjoint);
        assert_eq!(report.overlapping, vec![(0, 1)]);
        rs.rules.truncate(1);
        assert!(rs.check_disjoint().disjoint);
    }

    #[test]
    fn touching_intervals_are_disjoint() {
        let tree = DecisionTree::stump(1, 0, 1.5, Label::Positive, Label::Positive);
        let rs = extract_rules(&tree);
        assert_eq!(rs.rules.len(), 2);
        assert!(rs.check_disjoint().disjoint);
    }

    #[test]
    fn inverted_polarity() {
        let rs = extract_rules_with(&stump(), Polarity::AcceptRules);
        assert_eq!(rs.default_action, Action::Reject);
        assert_eq!(rs.apply(&[0.0]).unwrap(), Action::Allow);
        assert_eq!(rs.apply(&[2.0]).unwrap(), Action::Reject);
        assert!(rs.render(Format::Text).starts_with("IF x0<1.5 then ACCEPT\n"));
        let back = RuleSet::parse_machine(&rs.render(Format::Machine)).unwrap();
        assert_eq!(back, rs);
    }

    #[test]
    fn machine_round_trip_with_awkward_names() {
        let tree = DecisionTree::stump(2, 1, 0.1 + 0.2, Label::Negative, Label::Positive)
            .with_feature_names(vec!["a b".into(), "x<=&%y#".into()])
            .unwrap();
        let rs = extract_rules(&tree);
        let text = rs.render(Format::Machine);
        let back = RuleSet::parse_machine(&text).unwrap();
        assert_eq!(back, rs);
        assert_eq!(back.render(Format::Machine), text);
        assert_eq!(back.rules[0].predicates[0].threshold, 0.1 + 0.2);
    }

    #[test]
    fn machine_parse_errors() {
        assert!(RuleSet::parse_machine("").is_err());
        let good = extract_rules(&stump()).render(Format::Machine);
        assert!(RuleSet::parse_machine(&good.replace("REJECT x0", "DROP x0")).is_err());
        assert!(RuleSet::parse_machine(&good.replace(">=1.5", "~1.5")).is_err());
        assert!(RuleSet::parse_machine(&good.replace("x0>=", "nope>=")).is_err());
        assert!(RuleSet::parse_machine(&good.replace("1.5", "one")).is_err());
    }

    fn grid_dataset(pts: &[(i32, i32, bool)]) -> LabeledDataset {
        LabeledDataset::from_samples(
            2,
            pts.iter()
                .map(|&(a, b, p)| {
                    Sample::new(
                        vec![a as f64, b as f64],
                        if p { Label::Positive } else { Label::Negative },
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rules_agree_with_tree(
            pts in prop::collection::vec((0i32..8, 0i32..8, any::<bool>()), 1..40),
            depth in prop::option::of(1usize..5),
        ) {
            let ds = grid_dataset(&pts);
            let cfg = TrainConfig { max_depth: depth, ..Default::default() };
            let tree = fit(&ds, &cfg).unwrap();
            let rs = extract_rules(&tree);
            prop_assert!(rs.check_disjoint().disjoint);
            // Half-integer grid covers every cell between thresholds.
            for a in -2..=18 {
                for b in -2..=18 {
                    let x = [a as f64 / 2.0, b as f64 / 2.0];
                    let rejected = rs.apply(&x).unwrap() == Action::Reject;
                    prop_assert_eq!(rejected, tree.predict(&x).unwrap() == Label::Positive);
                }
            }
            let text = rs.render(Format::Machine);
            let back = RuleSet::parse_machine(&text).unwrap();
            prop_assert_eq!(back.render(Format::Machine), text);
        }
    }
}
