use serde::{Deserialize, Serialize};

use crate::cart::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Grow {
        added_true_positives: usize,
        added_by_selection: usize,
        improved_best: bool,
    },
    PruneFalseNegatives {
        removed: usize,
    },
    DuplicateFalsePositives {
        duplicated: usize,
    },
}

/// What happened to one particle in one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub particle: usize,
    pub separable: bool,
    /// Fitness of the separated set for separable particles, otherwise of
    /// the set that was fitted.
    pub fitness: u64,
    pub k: f64,
    pub particle_confusion: ConfusionMatrix,
    pub full_confusion: ConfusionMatrix,
    pub action: Action,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub entries: Vec<LogEntry>,
    /// Best fitness after initialisation (index 0) and after every iteration.
    pub best_fitness: Vec<u64>,
}

impl IterationLog {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn is_fitness_monotone(&self) -> bool {
        self.best_fitness.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Confusion matrix of the best boundary on the full training set after a
/// given iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub confusion: ConfusionMatrix,
}

impl Checkpoint {
    pub fn new(iteration: usize, confusion: ConfusionMatrix) -> Self {
        Checkpoint {
            iteration,
            confusion,
        }
    }
}

const CHECKPOINT_HEADER: &str = "iteration,TN,TP,FN,FP";

/// `iteration,TN,TP,FN,FP` table, one row per checkpoint.
pub fn checkpoints_csv(rows: &[Checkpoint]) -> String {
    let mut out = String::from(CHECKPOINT_HEADER);
    out.push('\n');
    for c in rows {
        let m = c.confusion;
        out.push_str(&format!("{},{},{},{},{}\n", c.iteration, m.tn, m.tp, m.fn_, m.fp));
    }
    out
}

pub fn parse_checkpoints_csv(text: &str) -> Result<Vec<Checkpoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_HEADER) {
        return Err(Error::Schema("checkpoint table header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<u64> = l
                .split(',')
                .map(|c| c.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Schema(format!("checkpoint row {l:?}: {e}")))?;
            if v.len() != 5 {
                return Err(Error::Schema(format!("checkpoint row {l:?} has {} cells", v.len())));
            }
            Ok(Checkpoint::new(
                v[0] as usize,
                ConfusionMatrix {
                    tn: v[1],
                    tp: v[2],
                    fn_: v[3],
                    fp: v[4],
                },
            ))
        })
        .collect()
}
