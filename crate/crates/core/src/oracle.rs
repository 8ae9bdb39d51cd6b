//! Brute-force reference solvers for tiny instances. They exist to check
//! the heuristic and iterative solvers in tests and are far too slow for
//! real data.

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cart::{evaluate, fit, TrainConfig};
use crate::dataset::{Label, LabeledDataset, Sample};
use crate::error::{Error, Result};
use crate::zsvm::CostConfig;

pub const MIN_ONES_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinOnes {
    /// Largest number of positives that can be kept while a tree trained on
    /// them plus every negative classifies that set perfectly.
    pub max_retained: usize,
    /// One subset achieving it, indexed by positive rank.
    pub witness: FixedBitSet,
}

/// Exhaustive search over positive subsets, largest first.
pub fn min_ones(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<MinOnes> {
    let positives = ds.positive_indices();
    let negatives = ds.negative_indices();
    let n_p = positives.len();
    if n_p > MIN_ONES_CAP {
        return Err(Error::OracleTooLarge { n_p, cap: MIN_ONES_CAP });
    }
    if negatives.is_empty() {
        return Err(Error::NoNegatives);
    }
    let mut masks: Vec<u32> = (0..1u32 << n_p).collect();
    masks.sort_by_key(|m| (std::cmp::Reverse(m.count_ones()), *m));
    for m in masks {
        let mut rows = negatives.clone();
        rows.extend((0..n_p).filter(|b| m >> b & 1 == 1).map(|b| positives[b]));
        rows.sort_unstable();
        let sub = ds.select(&rows);
        let tree = fit(&sub, cfg)?;
        if evaluate(&tree, &sub)?.errors() == 0 {
            let mut witness = FixedBitSet::with_capacity(n_p);
            for b in 0..n_p {
                witness.set(b, m >> b & 1 == 1);
            }
            return Ok(MinOnes {
                max_retained: m.count_ones() as usize,
                witness,
            });
        }
    }
    unreachable!("the empty subset is always separable")
}

/// A tiny dataset with the tree settings it is meant to be searched under.
#[derive(Debug, Clone)]
pub struct CraftedCase {
    pub name: String,
    pub dataset: LabeledDataset,
    pub cart: TrainConfig,
    /// Unlimited-depth cases, where the only obstacle is conflicting
    /// duplicates and the search should find the optimum quickly.
    pub easy: bool,
}

/// Ten easy and ten hard integer-grid cases, each with at most twelve
/// positives.
pub fn crafted_cases() -> Vec<CraftedCase> {
    let mut cases = Vec::new();
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let n_p = 4 + (i as usize % 9);
        let conflicts = (i as usize % 4).min(n_p);
        let mut samples = Vec::new();
        for _ in 0..8 {
            let x = vec![rng.random_range(0..6) as f64, rng.random_range(0..10) as f64];
            samples.push(Sample::new(x, Label::Negative));
        }
        for c in 0..conflicts {
            samples.push(Sample::new(samples[c].x.clone(), Label::Positive));
        }
        for _ in conflicts..n_p {
            let x = vec![rng.random_range(3..10) as f64, rng.random_range(0..10) as f64];
            samples.push(Sample::new(x, Label::Positive));
        }
        cases.push(CraftedCase {
            name: format!("easy-{i}"),
            dataset: LabeledDataset::from_samples(2, samples).expect("valid crafted data"),
            cart: TrainConfig::default(),
            easy: true,
        });
    }
    for i in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i);
        let n_p = 6 + (i as usize % 7);
        let mut samples = Vec::new();
        for _ in 0..10 {
            let x = vec![rng.random_range(0..6) as f64, rng.random_range(0..6) as f64];
            samples.push(Sample::new(x, Label::Negative));
        }
        for _ in 0..n_p {
            let x = vec![rng.random_range(2..8) as f64, rng.random_range(2..8) as f64];
            samples.push(Sample::new(x, Label::Positive));
        }
        let cart = TrainConfig {
            max_depth: Some(1 + (i as usize % 2)),
            ..Default::default()
        };
        cases.push(CraftedCase {
            name: format!("hard-{i}"),
            dataset: LabeledDataset::from_samples(2, samples).expect("valid crafted data"),
            cart,
            easy: false,
        });
    }
    cases
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub angles: usize,
    pub scales: usize,
    /// `‖a‖` ranges over `10^min_log10 ..= 10^max_log10`.
    pub min_log10: f64,
    pub max_log10: f64,
    /// Number of local zoom passes after the coarse grid.
    pub zoom_rounds: usize,
    /// Points per axis in each zoom pass.
    pub zoom_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            angles: 360,
            scales: 80,
            min_log10: -3.0,
            max_log10: 3.0,
            zoom_rounds: 12,
            zoom_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub objective: f64,
    pub a: [f64; 2],
    pub b0: f64,
}

fn cost_of(costs: &CostConfig, label: Label) -> f64 {
    match label {
        Label::Negative => costs.c1,
        Label::Positive => costs.c2,
    }
}

/// Objective minimized over the offset by trying every hinge breakpoint.
fn min_over_offset(ds: &LabeledDataset, costs: &CostConfig, a: [f64; 2]) -> (f64, f64) {
    let scores: Vec<f64> = (0..ds.len())
        .map(|i| a[0] * ds.value(i, 0) + a[1] * ds.value(i, 1))
        .collect();
    let reg = 0.5 * (a[0] * a[0] + a[1] * a[1]);
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..ds.len() {
        let b = ds.label(j).sign() - scores[j];
        let loss: f64 = (0..ds.len())
            .map(|i| {
                let y = ds.label(i).sign();
                cost_of(costs, ds.label(i)) * ds.weight(i) as f64 * (1.0 - y * (scores[i] + b)).max(0.0)
            })
            .sum();
        if reg + loss < best.0 {
            best = (reg + loss, b);
        }
    }
    best
}

/// Grid search over direction angle and log-scale of `a`, exact in the
/// offset, followed by repeated local zooming. Two features only.
pub fn zsvm_grid_min(ds: &LabeledDataset, costs: &CostConfig, grid: &GridSpec) -> Result<GridMinimum> {
    if ds.n_features() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: ds.n_features(),
        });
    }
    if ds.n_pos() == 0 || ds.n_neg() == 0 {
        return Err(Error::SingleClass);
    }
    let point = |theta: f64, log_s: f64| {
        let s = 10f64.powf(log_s);
        [s * theta.cos(), s * theta.sin()]
    };
    let tau = std::f64::consts::TAU;
    let d_theta = tau / grid.angles as f64;
    let d_log = (grid.max_log10 - grid.min_log10) / (grid.scales.max(2) - 1) as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..grid.angles {
        for j in 0..grid.scales {
            let (theta, log_s) = (i as f64 * d_theta, grid.min_log10 + j as f64 * d_log);
            let (v, b) = min_over_offset(ds, costs, point(theta, log_s));
            if v < best.0 {
                best = (v, b, theta, log_s);
            }
        }
    }
    let (mut span_t, mut span_s) = (d_theta, d_log);
    for _ in 0..grid.zoom_rounds {
        let (_, _, t0, s0) = best;
        let half = (grid.zoom_points / 2) as f64;
        for i in 0..grid.zoom_points {
            for j in 0..grid.zoom_points {
                let theta = t0 + (i as f64 - half) / half * span_t;
                let log_s = s0 + (j as f64 - half) / half * span_s;
                let (v, b) = min_over_offset(ds, costs, point(theta, log_s));
                if v < best.0 {
                    best = (v, b, theta, log_s);
                }
            }
        }
        span_t /= 4.0;
        span_s /= 4.0;
    }
    // The a = 0 point is not on the polar grid.
    let (v0, b0) = min_over_offset(ds, costs, [0.0, 0.0]);
    if v0 < best.0 {
        return Ok(GridMinimum {
            objective: v0,
            a: [0.0, 0.0],
            b0,
        });
    }
    Ok(GridMinimum {
        objective: best.0,
        a: point(best.2, best.3),
        b0: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;

    fn ds(pts: &[(f64, f64, bool)]) -> LabeledDataset {
        LabeledDataset::from_samples(
            2,
            pts.iter()
                .map(|&(a, b, p)| Sample::new(vec![a, b], if p { Label::Positive } else { Label::Negative }))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn separable_set_keeps_everything() {
        let d = ds(&[(0.0, 0.0, false), (1.0, 0.0, true), (2.0, 0.0, true)]);
        let r = min_ones(&d, &TrainConfig::default()).unwrap();
        assert_eq!(r.max_retained, 2);
        assert_eq!(r.witness.count_ones(..), 2);
    }

    #[test]
    fn conflicting_positive_is_dropped() {
        let d = ds(&[(0.0, 0.0, false), (0.0, 0.0, true), (2.0, 0.0, true), (3.0, 1.0, true)]);
        let r = min_ones(&d, &TrainConfig::default()).unwrap();
        assert_eq!(r.max_retained, 2);
        assert!(!r.witness.contains(0));
    }

    #[test]
    fn cap_is_enforced() {
        let pts: Vec<_> = (0..17).map(|i| (i as f64, 0.0, true)).chain([(99.0, 0.0, false)]).collect();
        assert!(matches!(
            min_ones(&ds(&pts), &TrainConfig::default()),
            Err(Error::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn grid_finds_two_point_margin() {
        let d = ds(&[(0.0, 0.0, false), (2.0, 0.0, true)]);
        let m = zsvm_grid_min(&d, &CostConfig::classic(1.0).unwrap(), &GridSpec::default()).unwrap();
        assert!((m.objective - 0.5).abs() < 1e-6, "{}", m.objective);
        assert!((m.a[0] - 1.0).abs() < 1e-3 && m.a[1].abs() < 1e-3);
    }
}
