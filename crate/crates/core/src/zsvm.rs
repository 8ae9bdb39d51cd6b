//! Class-weighted linear soft-margin classifier and a cost-sweep harness.
//!
//! Minimizes `½‖a‖² + c1·Σ_neg w·η + c2·Σ_pos w·η` with hinge slacks
//! `η = max(0, 1 − y(a·x + b0))`. The hinge is replaced by a softplus of
//! temperature `μ`, which is minimized by damped Newton steps and then
//! cooled towards zero with warm starts. The offset is finally re-set to its
//! exact minimizer for the returned direction.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cart::ConfusionMatrix;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBoundary {
    pub a: Vec<f64>,
    pub b0: f64,
}

impl LinearBoundary {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b0
    }

    /// Positive iff the point lies strictly on the positive side.
    pub fn predict(&self, x: &[f64]) -> Label {
        if self.score(x) > 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Width of the band between the ±1 level sets.
    pub fn gutter(&self) -> f64 {
        2.0 / self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Slack cost of negative samples.
    pub c1: f64,
    /// Slack cost of positive samples.
    pub c2: f64,
}

impl CostConfig {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let c = CostConfig { c1, c2 };
        c.validate()?;
        Ok(c)
    }

    pub fn classic(c: f64) -> Result<Self> {
        Self::new(c, c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite() && self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "slack costs must be positive and finite, got c1={} c2={}",
                self.c1, self.c2
            )));
        }
        Ok(())
    }

    fn of(&self, label: Label) -> f64 {
        match label {
            Label::Negative => self.c1,
            Label::Positive => self.c2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Newton steps allowed per smoothing stage.
    pub iterations: usize,
    /// Smoothing stages; the temperature drops tenfold per stage from 1.
    pub stages: usize,
    /// Stage stops once the Newton decrement falls below this, relative to
    /// the objective.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            iterations: 100,
            stages: 12,
            tolerance: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.stages == 0 {
            return Err(Error::InvalidConfig("solver needs at least one iteration and stage".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub boundary: LinearBoundary,
    pub costs: CostConfig,
    pub slacks: Vec<f64>,
    pub objective: f64,
    pub confusion: ConfusionMatrix,
    pub gutter: f64,
    pub converged: bool,
}

/// Exact primal objective at a given boundary, slacks at their minimum.
pub fn objective(ds: &LabeledDataset, boundary: &LinearBoundary, costs: &CostConfig) -> f64 {
    let reg = 0.5 * boundary.a.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = (0..ds.len())
        .map(|i| {
            let y = ds.label(i).sign();
            let eta = (1.0 - y * boundary.score(ds.row(i))).max(0.0);
            costs.of(ds.label(i)) * ds.weight(i) as f64 * eta
        })
        .sum();
    reg + loss
}

pub fn confusion(ds: &LabeledDataset, boundary: &LinearBoundary) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for i in 0..ds.len() {
        cm.record(ds.label(i), boundary.predict(ds.row(i)), ds.weight(i));
    }
    cm
}

struct Problem<'a> {
    ds: &'a LabeledDataset,
    /// Per-sample slack cost times multiplicity.
    cost: Vec<f64>,
    sign: Vec<f64>,
    scratch: Vec<(f64, usize)>,
}

impl<'a> Problem<'a> {
    fn new(ds: &'a LabeledDataset, costs: &CostConfig) -> Self {
        Problem {
            ds,
            cost: (0..ds.len())
                .map(|i| costs.of(ds.label(i)) * ds.weight(i) as f64)
                .collect(),
            sign: ds.labels().iter().map(|l| l.sign()).collect(),
            scratch: Vec::with_capacity(ds.len()),
        }
    }

    fn dot(&self, a: &[f64], i: usize) -> f64 {
        a.iter().zip(self.ds.row(i)).map(|(a, x)| a * x).sum()
    }

    /// Offset minimizing the hinge loss for fixed `a`; the midpoint of the
    /// minimizing interval when it is not a single point.
    fn best_offset(&mut self, a: &[f64]) -> f64 {
        // Sample i has zero slack on one side of b = y_i − a·x_i.
        self.scratch.clear();
        for i in 0..self.ds.len() {
            self.scratch.push((self.sign[i] - self.dot(a, i), i));
        }
        self.scratch.sort_by(|p, q| p.0.total_cmp(&q.0));
        let total: f64 = self.cost.iter().sum();
        let eps = 1e-12 * total;
        // Slope just right of each breakpoint: active negatives minus active positives.
        let mut slope = -self
            .cost
            .iter()
            .zip(&self.sign)
            .filter(|(_, &s)| s > 0.0)
            .map(|(c, _)| c)
            .sum::<f64>();
        let n = self.scratch.len();
        let mut k = 0;
        while k < n {
            let bp = self.scratch[k].0;
            // Consume every sample sharing this breakpoint.
            while k < n && self.scratch[k].0 == bp {
                slope += self.cost[self.scratch[k].1];
                k += 1;
            }
            if slope > eps {
                return bp;
            }
            if slope >= -eps {
                let next = if k < n { self.scratch[k].0 } else { bp };
                return bp + (next - bp) / 2.0;
            }
        }
        self.scratch[n - 1].0
    }

    fn value(&self, a: &[f64], b: f64) -> f64 {
        let reg = 0.5 * a.iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = (0..self.ds.len())
            .map(|i| self.cost[i] * (1.0 - self.sign[i] * (self.dot(a, i) + b)).max(0.0))
            .sum();
        reg + loss
    }

    /// Smoothed objective, gradient and Hessian in `(a, b)`.
    fn smoothed(&self, theta: &[f64], mu: f64, grad: Option<(&mut [f64], &mut [f64])>) -> f64 {
        let d = theta.len() - 1;
        let (a, b) = theta.split_at(d);
        let mut val = 0.5 * a.iter().map(|v| v * v).sum::<f64>();
        let mut gh = grad;
        if let Some((g, h)) = gh.as_mut() {
            g.fill(0.0);
            h.fill(0.0);
            g[..d].copy_from_slice(a);
            for j in 0..d {
                h[j * (d + 1) + j] = 1.0;
            }
        }
        for i in 0..self.ds.len() {
            let m = self.sign[i] * (self.dot(a, i) + b[0]);
            let u = (1.0 - m) / mu;
            // softplus(u) and its derivative, overflow-safe.
            let sp = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
            val += self.cost[i] * mu * sp;
            if let Some((g, h)) = gh.as_mut() {
                let sig = if u > 0.0 { 1.0 / (1.0 + (-u).exp()) } else { u.exp() / (1.0 + u.exp()) };
                let curv = self.cost[i] * sig * (1.0 - sig) / mu;
                let row = self.ds.row(i);
                let z = |j: usize| self.sign[i] * if j < d { row[j] } else { 1.0 };
                for j in 0..=d {
                    g[j] -= self.cost[i] * sig * z(j);
                    if curv > 0.0 {
                        for k in 0..=d {
                            h[j * (d + 1) + k] += curv * z(j) * z(k);
                        }
                    }
                }
            }
        }
        val
    }
}

/// Solve `h x = rhs` in place by Gaussian elimination with partial pivoting.
fn solve(h: &mut [f64], rhs: &mut [f64]) -> bool {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| h[p * n + col].abs().total_cmp(&h[q * n + col].abs()))
            .expect("non-empty range");
        if h[piv * n + col].abs() < 1e-300 {
            return false;
        }
        if piv != col {
            for k in 0..n {
                h.swap(piv * n + k, col * n + k);
            }
            rhs.swap(piv, col);
        }
        for r in col + 1..n {
            let f = h[r * n + col] / h[col * n + col];
            for k in col..n {
                h[r * n + k] -= f * h[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let s: f64 = (col + 1..n).map(|k| h[col * n + k] * rhs[k]).sum();
        rhs[col] = (rhs[col] - s) / h[col * n + col];
    }
    rhs.iter().all(|v| v.is_finite())
}

/// Fit the weighted soft-margin boundary.
pub fn fit_zsvm(ds: &LabeledDataset, costs: &CostConfig, solver: &SolverConfig) -> Result<FitReport> {
    costs.validate()?;
    solver.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if ds.n_pos() == 0 || ds.n_neg() == 0 {
        return Err(Error::SingleClass);
    }
    let d = ds.n_features();
    let mut prob = Problem::new(ds, costs);
    let n = d + 1;

    let mut theta = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    let mut step = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut converged = false;
    let mut mu = 1.0;
    for _ in 0..solver.stages {
        converged = false;
        for _ in 0..solver.iterations {
            let f = prob.smoothed(&theta, mu, Some((&mut grad, &mut hess)));
            // Tiny ridge keeps the system solvable when every sample sits
            // far from its hinge.
            let ridge = 1e-12 * (0..n).map(|j| hess[j * n + j]).sum::<f64>() / n as f64;
            for j in 0..n {
                hess[j * n + j] += ridge.max(1e-300);
                step[j] = -grad[j];
            }
            if !solve(&mut hess, &mut step) {
                break;
            }
            let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
            if decrement <= solver.tolerance * f.abs().max(1e-300) {
                converged = true;
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                for j in 0..n {
                    trial[j] = theta[j] + t * step[j];
                }
                if prob.smoothed(&trial, mu, None) <= f - 1e-4 * t * decrement {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No further progress at this resolution.
                converged = true;
                break;
            }
            theta.copy_from_slice(&trial);
        }
        mu *= 0.1;
    }

    let mut best_a = theta[..d].to_vec();
    let mut best_b = theta[d];
    let mut best_val = prob.value(&best_a, best_b);
    let exact_b = prob.best_offset(&best_a);
    let v = prob.value(&best_a, exact_b);
    if v < best_val {
        best_val = v;
        best_b = exact_b;
    }
    // The all-zero direction is the reference every fit must match.
    let zero = vec![0.0; d];
    let zero_b = prob.best_offset(&zero);
    if prob.value(&zero, zero_b) < best_val {
        best_a = zero;
        best_b = zero_b;
    }

    let boundary = LinearBoundary { a: best_a, b0: best_b };
    if boundary.norm() == 0.0 {
        return Err(Error::DegenerateBoundary);
    }
    let slacks: Vec<f64> = (0..ds.len())
        .map(|i| (1.0 - ds.label(i).sign() * boundary.score(ds.row(i))).max(0.0))
        .collect();
    Ok(FitReport {
        objective: objective(ds, &boundary, costs),
        confusion: confusion(ds, &boundary),
        gutter: boundary.gutter(),
        boundary,
        costs: *costs,
        slacks,
        converged,
    })
}

/// One sweep cell; `report` is `None` when the fit failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub costs: CostConfig,
    pub report: Option<FitReport>,
    pub error: Option<String>,
}

pub fn sweep_costs(
    ds: &LabeledDataset,
    grid: &[CostConfig],
    solver: &SolverConfig,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty cost grid".into()));
    }
    Ok(grid
        .par_iter()
        .map(|costs| match fit_zsvm(ds, costs, solver) {
            Ok(report) => SweepRow {
                costs: *costs,
                report: Some(report),
                error: None,
            },
            Err(e) => SweepRow {
                costs: *costs,
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

pub const SWEEP_HEADER: &str = "c1,c2,TN,TP,FN,FP,gutter,objective,converged";

/// Fixed-column CSV; failed cells leave the numeric columns empty and
/// report `failed` in the last column.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        match &row.report {
            Some(r) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                row.costs.c1,
                row.costs.c2,
                r.confusion.tn,
                r.confusion.tp,
                r.confusion.fn_,
                r.confusion.fp,
                r.gutter,
                r.objective,
                r.converged
            )?,
            None => writeln!(out, "{},{},,,,,,,failed", row.costs.c1, row.costs.c2)?,
        }
    }
    Ok(())
}
