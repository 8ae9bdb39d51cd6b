//! The zero-false-positive swarm.
//!
//! Every particle is a reduced training set: *all* negatives (each with a
//! multiplicity of at least one) plus a subset of the positives selected by a
//! bitmask. Each iteration refits the core classifier on every particle.
//!
//! * A separable particle (no FP and no FN on its own set) first absorbs the
//!   positives its boundary already catches on the full training set. That
//!   set is still separated by the same boundary and is offered to the global
//!   best. The particle then adds up to `floor(k)` of the missed positives,
//!   drawn at random with members of the best's mask weighing more, and `k`
//!   grows geometrically.
//! * A particle with false negatives drops those positives.
//! * A particle with only false positives duplicates the offending negatives.
//!
//! Both pruning branches reset `k`. Because every particle keeps every
//! negative, a separable particle's boundary has no false positives on the
//! full training set, so the best record is always zero-FP.
//!
//! Fits within an iteration run in parallel; all state updates happen
//! afterwards in particle order, with one RNG stream per particle, so results
//! do not depend on the worker count.

mod log;

use fixedbitset::FixedBitSet;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::{evaluate_weighted, ConfusionMatrix, DecisionTree, TrainConfig};
use crate::classifier::{Cart, CoreClassifier};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

pub use log::{checkpoints_csv, parse_checkpoints_csv, Action, Checkpoint, IterationLog, LogEntry};

/// Default reporting grid.
pub const DEFAULT_CHECKPOINTS: [usize; 5] = [10, 50, 100, 500, 1000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub population: usize,
    /// Multiplier applied to `k` after each separable step.
    pub k_growth: f64,
    /// Value `k` returns to whenever a particle becomes inseparable.
    pub k_reset: f64,
    pub k_initial: f64,
    pub max_iterations: usize,
    /// Stop once the best boundary misses at most this many positives
    /// (weighted) on the full training set.
    pub target_fn: u64,
    pub checkpoints: Vec<usize>,
    /// Selection weight of a missed positive that belongs to the best mask;
    /// other candidates weigh 1.
    pub best_weight: f64,
    pub seed: u64,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            population: 5,
            k_growth: 1.5,
            k_reset: 1.0,
            k_initial: 1.0,
            max_iterations: 1000,
            target_fn: 0,
            checkpoints: DEFAULT_CHECKPOINTS.to_vec(),
            best_weight: 4.0,
            seed: 0,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.population == 0 {
            return bad("population must be at least 1");
        }
        if !(self.k_growth > 1.0) || !self.k_growth.is_finite() {
            return bad("k_growth must be a finite number greater than 1");
        }
        if !(self.k_reset >= 1.0) || !(self.k_initial >= 1.0) {
            return bad("k_reset and k_initial must be at least 1");
        }
        if !(self.best_weight > 0.0) || !self.best_weight.is_finite() {
            return bad("best_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle<M> {
    /// Bit `j` set means the `j`-th positive of the dataset is included.
    pub positive_mask: FixedBitSet,
    /// Multiplicity of the `q`-th negative, always at least 1.
    pub negative_mult: Vec<u64>,
    pub k: f64,
    pub last_boundary: Option<M>,
}

impl<M> Particle<M> {
    pub fn retained(&self) -> usize {
        self.positive_mask.count_ones(..)
    }
}

/// Default fitness: number of positives in the separated set.
pub fn retained_positives(mask: &FixedBitSet, _full: &ConfusionMatrix) -> u64 {
    mask.count_ones(..) as u64
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRecord<M> {
    pub positive_mask: FixedBitSet,
    pub boundary: M,
    pub fitness: u64,
    pub full_confusion: ConfusionMatrix,
    /// `(iteration, particle)` that produced this record; `None` for the
    /// all-negative fallback. Iteration 0 is initialisation.
    pub origin: Option<(usize, usize)>,
}

pub struct SwarmState<M> {
    pub particles: Vec<Particle<M>>,
    pub best: BestRecord<M>,
    pub iteration: usize,
    rngs: Vec<ChaCha8Rng>,
}

#[derive(Debug, Clone)]
pub struct SwarmRun<M> {
    pub best: BestRecord<M>,
    pub log: IterationLog,
    pub checkpoints: Vec<Checkpoint>,
    pub particles: Vec<Particle<M>>,
    pub iterations: usize,
    pub target_reached: bool,
}

/// Scores a separated positive set given its boundary's full-set confusion.
pub type FitnessFn = Box<dyn Fn(&FixedBitSet, &ConfusionMatrix) -> u64 + Send + Sync>;

struct Evaluation<M> {
    model: M,
    particle: ConfusionMatrix,
    full: ConfusionMatrix,
    predictions: Vec<Label>,
}

/// Whether a boundary commits no FP and no FN on a weighted set.
pub fn is_separable(tree: &DecisionTree, ds: &LabeledDataset, weights: &[u64]) -> Result<bool> {
    let cm = evaluate_weighted(tree, ds, weights)?;
    Ok(cm.fp == 0 && cm.fn_ == 0)
}

/// Draw `min(k, candidates.len())` distinct candidates without replacement.
/// Candidates for which `in_best` holds carry `best_weight`, others weight 1.
/// The result is sorted.
pub fn select_additions<R: Rng + ?Sized>(
    candidates: &[usize],
    in_best: impl Fn(usize) -> bool,
    k: usize,
    best_weight: f64,
    rng: &mut R,
) -> Vec<usize> {
    if k == 0 || candidates.is_empty() {
        return Vec::new();
    }
    let mut picked: Vec<usize> = if k >= candidates.len() {
        candidates.to_vec()
    } else {
        candidates
            .choose_multiple_weighted(rng, k, |&c| if in_best(c) { best_weight } else { 1.0 })
            .expect("selection weights are positive and finite")
            .copied()
            .collect()
    };
    picked.sort_unstable();
    picked
}

fn particle_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

pub struct Swarm<'a, C: CoreClassifier> {
    ds: &'a LabeledDataset,
    classifier: C,
    cfg: SwarmConfig,
    prepared: C::Prepared,
    positives: Vec<usize>,
    negatives: Vec<usize>,
    fitness: FitnessFn,
    pool: rayon::ThreadPool,
}

impl<'a, C: CoreClassifier> Swarm<'a, C> {
    /// `workers` of 0 uses one thread per core. Results do not depend on it.
    pub fn new(ds: &'a LabeledDataset, classifier: C, cfg: SwarmConfig, workers: usize) -> Result<Self> {
        cfg.validate()?;
        if ds.n_neg() == 0 {
            return Err(Error::NoNegatives);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(Swarm {
            prepared: classifier.prepare(ds),
            positives: ds.positive_indices(),
            negatives: ds.negative_indices(),
            ds,
            classifier,
            cfg,
            fitness: Box::new(retained_positives),
            pool,
        })
    }

    /// Replace the default fitness (number of retained positives).
    pub fn with_fitness(mut self, fitness: FitnessFn) -> Self {
        self.fitness = fitness;
        self
    }

    pub fn config(&self) -> &SwarmConfig {
        &self.cfg
    }

    /// Dataset row of the `j`-th positive.
    pub fn positive_row(&self, j: usize) -> usize {
        self.positives[j]
    }

    /// Training weights of a particle's reduced set.
    pub fn particle_weights(&self, p: &Particle<C::Model>) -> Vec<u64> {
        let mut w = vec![0; self.ds.len()];
        for j in p.positive_mask.ones() {
            let i = self.positives[j];
            w[i] = self.ds.weight(i);
        }
        for (q, &i) in self.negatives.iter().enumerate() {
            w[i] = self.ds.weight(i) * p.negative_mult[q];
        }
        w
    }

    fn evaluate(&self, weights: &[u64]) -> Result<Evaluation<C::Model>> {
        let model = self.classifier.fit(self.ds, &self.prepared, weights)?;
        let predictions: Vec<Label> = self
            .ds
            .rows()
            .map(|x| self.classifier.predict(&model, x))
            .collect();
        Ok(Evaluation {
            particle: ConfusionMatrix::from_predictions(self.ds, &predictions, weights),
            full: ConfusionMatrix::from_predictions(self.ds, &predictions, self.ds.weights()),
            model,
            predictions,
        })
    }

    /// The all-negative classifier: zero FP, fitness 0.
    fn trivial_best(&self) -> Result<BestRecord<C::Model>> {
        let mut w = vec![0; self.ds.len()];
        for &i in &self.negatives {
            w[i] = self.ds.weight(i);
        }
        let e = self.evaluate(&w)?;
        Ok(BestRecord {
            positive_mask: FixedBitSet::with_capacity(self.positives.len()),
            boundary: e.model,
            fitness: 0,
            full_confusion: e.full,
            origin: None,
        })
    }

    /// Build the initial population and best record.
    ///
    /// The core classifier is fitted on the full set once; each particle
    /// starts from all negatives plus one of its true positives, drawn
    /// without repetition until the candidates run out and then reused. When
    /// nothing is caught, any positive may seed a particle.
    pub fn init(&self) -> Result<SwarmState<C::Model>> {
        let n_p = self.positives.len();
        let full = self.evaluate(self.ds.weights())?;
        let mut candidates: Vec<usize> = (0..n_p)
            .filter(|&j| full.predictions[self.positives[j]] == Label::Positive)
            .collect();
        if candidates.is_empty() {
            candidates = (0..n_p).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let seeds: Vec<Option<usize>> = if candidates.is_empty() {
            vec![None; self.cfg.population]
        } else {
            let mut drawn = Vec::with_capacity(self.cfg.population);
            while drawn.len() < self.cfg.population {
                let take = (self.cfg.population - drawn.len()).min(candidates.len());
                drawn.extend(
                    rand::seq::index::sample(&mut rng, candidates.len(), take)
                        .into_iter()
                        .map(|k| Some(candidates[k])),
                );
            }
            drawn
        };

        let particles: Vec<Particle<C::Model>> = seeds
            .into_iter()
            .map(|seed| {
                let mut mask = FixedBitSet::with_capacity(n_p);
                if let Some(j) = seed {
                    mask.insert(j);
                }
                Particle {
                    positive_mask: mask,
                    negative_mult: vec![1; self.negatives.len()],
                    k: self.cfg.k_initial,
                    last_boundary: None,
                }
            })
            .collect();

        let mut best = self.trivial_best()?;
        let evals = self.evaluate_all(&particles)?;
        let mut particles = particles;
        for (idx, (p, e)) in particles.iter_mut().zip(evals).enumerate() {
            if e.particle.fp == 0 && e.particle.fn_ == 0 {
                let (separated, _, _) = self.separated_set(&p.positive_mask, &e);
                self.offer(&mut best, &separated, &e, (0, idx));
            }
            p.last_boundary = Some(e.model);
        }
        Ok(SwarmState {
            rngs: (0..particles.len()).map(|i| particle_rng(self.cfg.seed, i)).collect(),
            particles,
            best,
            iteration: 0,
        })
    }

    fn evaluate_all(&self, particles: &[Particle<C::Model>]) -> Result<Vec<Evaluation<C::Model>>> {
        self.pool.install(|| {
            particles
                .par_iter()
                .map(|p| self.evaluate(&self.particle_weights(p)))
                .collect()
        })
    }

    /// A separable particle's mask together with every positive its boundary
    /// catches on the full set; the boundary separates this larger set too.
    /// Also returns how many positives were added and the missed positives.
    fn separated_set(
        &self,
        mask: &FixedBitSet,
        e: &Evaluation<C::Model>,
    ) -> (FixedBitSet, usize, Vec<usize>) {
        let mut separated = mask.clone();
        let mut caught = 0;
        let mut missed = Vec::new();
        for (j, &i) in self.positives.iter().enumerate() {
            if e.predictions[i] == Label::Positive {
                if !separated.put(j) {
                    caught += 1;
                }
            } else {
                missed.push(j);
            }
        }
        (separated, caught, missed)
    }

    /// Replace `best` if the separated set is fitter, or equally fit with
    /// fewer misses on the full set.
    fn offer(
        &self,
        best: &mut BestRecord<C::Model>,
        mask: &FixedBitSet,
        e: &Evaluation<C::Model>,
        origin: (usize, usize),
    ) -> bool {
        let fitness = (self.fitness)(mask, &e.full);
        let better = fitness > best.fitness
            || (fitness == best.fitness && e.full.fn_ < best.full_confusion.fn_);
        if better {
            *best = BestRecord {
                positive_mask: mask.clone(),
                boundary: e.model.clone(),
                fitness,
                full_confusion: e.full,
                origin: Some(origin),
            };
        }
        better
    }

    /// One pass over every particle.
    pub fn step(&self, state: &mut SwarmState<C::Model>) -> Result<Vec<LogEntry>> {
        state.iteration += 1;
        let iteration = state.iteration;
        let evals = self.evaluate_all(&state.particles)?;
        let mut entries = Vec::with_capacity(evals.len());
        for (idx, e) in evals.into_iter().enumerate() {
            let p = &mut state.particles[idx];
            let k_before = p.k;
            let separable = e.particle.fp == 0 && e.particle.fn_ == 0;
            let mut fitness = (self.fitness)(&p.positive_mask, &e.full);
            let action = if separable {
                let (separated, caught, missed) = self.separated_set(&p.positive_mask, &e);
                p.positive_mask = separated;
                fitness = (self.fitness)(&p.positive_mask, &e.full);
                let improved_best = self.offer(&mut state.best, &p.positive_mask, &e, (iteration, idx));
                let best_mask = &state.best.positive_mask;
                let picks = select_additions(
                    &missed,
                    |j| best_mask.contains(j),
                    p.k.floor() as usize,
                    self.cfg.best_weight,
                    &mut state.rngs[idx],
                );
                for &j in &picks {
                    p.positive_mask.insert(j);
                }
                p.k *= self.cfg.k_growth;
                Action::Grow {
                    added_true_positives: caught,
                    added_by_selection: picks.len(),
                    improved_best,
                }
            } else if e.particle.fn_ > 0 {
                let drop: Vec<usize> = p
                    .positive_mask
                    .ones()
                    .filter(|&j| e.predictions[self.positives[j]] == Label::Negative)
                    .collect();
                for &j in &drop {
                    p.positive_mask.set(j, false);
                }
                p.k = self.cfg.k_reset;
                Action::PruneFalseNegatives { removed: drop.len() }
            } else {
                let mut duplicated = 0;
                for (q, &i) in self.negatives.iter().enumerate() {
                    if e.predictions[i] == Label::Positive {
                        p.negative_mult[q] += 1;
                        duplicated += 1;
                    }
                }
                p.k = self.cfg.k_reset;
                Action::DuplicateFalsePositives { duplicated }
            };
            entries.push(LogEntry {
                iteration,
                particle: idx,
                separable,
                fitness,
                k: k_before,
                particle_confusion: e.particle,
                full_confusion: e.full,
                action,
            });
            p.last_boundary = Some(e.model);
        }
        Ok(entries)
    }

    /// Iterate until the target FN count or the iteration cap is reached.
    ///
    /// Checkpoints scheduled after an early stop report the final best, since
    /// the run no longer changes it.
    pub fn run(&self) -> Result<SwarmRun<C::Model>> {
        let mut state = self.init()?;
        let mut log = IterationLog::default();
        log.best_fitness.push(state.best.fitness);
        let mut checkpoints = Vec::new();
        let mut wanted: Vec<usize> = self.cfg.checkpoints.clone();
        wanted.sort_unstable();
        wanted.dedup();
        wanted.retain(|&c| c <= self.cfg.max_iterations);
        let mut pending = wanted.into_iter().peekable();
        while pending.next_if_eq(&0).is_some() {
            checkpoints.push(Checkpoint::new(0, state.best.full_confusion));
        }

        let mut target_reached = false;
        while state.iteration < self.cfg.max_iterations {
            if state.best.full_confusion.fn_ <= self.cfg.target_fn {
                target_reached = true;
                break;
            }
            let entries = self.step(&mut state)?;
            log.entries.extend(entries);
            log.best_fitness.push(state.best.fitness);
            while pending.next_if_eq(&state.iteration).is_some() {
                checkpoints.push(Checkpoint::new(state.iteration, state.best.full_confusion));
            }
        }
        if state.best.full_confusion.fn_ <= self.cfg.target_fn {
            target_reached = true;
        }
        for c in pending {
            checkpoints.push(Checkpoint::new(c, state.best.full_confusion));
        }
        Ok(SwarmRun {
            best: state.best,
            log,
            checkpoints,
            particles: state.particles,
            iterations: state.iteration,
            target_reached,
        })
    }
}

/// Run the swarm with CART as the core classifier.
pub fn run(
    ds: &LabeledDataset,
    cart_cfg: &TrainConfig,
    swarm_cfg: &SwarmConfig,
    workers: usize,
) -> Result<SwarmRun<DecisionTree>> {
    cart_cfg.validate()?;
    Swarm::new(ds, Cart(*cart_cfg), swarm_cfg.clone(), workers)?.run()
}
