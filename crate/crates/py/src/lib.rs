//! Python module `zfp`: datasets, trees, the swarm search, the removal
//! baseline, rule compilation and the cost-weighted linear classifier.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use zfp_core::cart::{evaluate, fit, ConfusionMatrix, DecisionTree, TrainConfig};
use zfp_core::dataset::{
    load_csv, load_kdd, load_powergrid, synth_constellation, CsvOptions, Label, LabeledDataset, Preset, Sample,
};
use zfp_core::rulegen::{extract_rules_with, Action, Format, Polarity, RuleSet};
use zfp_core::swarm::{self, SwarmConfig, DEFAULT_CHECKPOINTS};
use zfp_core::zsvm::{self, CostConfig, SolverConfig};

create_exception!(zfp, ZfpError, PyException);

fn err(e: zfp_core::Error) -> PyErr {
    ZfpError::new_err(e.to_string())
}

type Counts = BTreeMap<&'static str, u64>;

fn counts(cm: &ConfusionMatrix) -> Counts {
    BTreeMap::from([("TN", cm.tn), ("TP", cm.tp), ("FN", cm.fn_), ("FP", cm.fp)])
}

fn label_of(v: i64) -> PyResult<Label> {
    match v {
        1 => Ok(Label::Positive),
        0 | -1 => Ok(Label::Negative),
        other => Err(ZfpError::new_err(format!("label must be 1 (attack) or 0/-1 (normal), got {other}"))),
    }
}

fn cart_config(max_depth: Option<usize>, min_leaf: u64, min_impurity_decrease: f64) -> PyResult<TrainConfig> {
    let cfg = TrainConfig {
        max_depth,
        min_samples_leaf: min_leaf,
        min_impurity_decrease,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// Labeled samples; label 1 marks an attack.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, labels, weights=None, feature_names=None))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<i64>,
        weights: Option<Vec<u64>>,
        feature_names: Option<Vec<String>>,
    ) -> PyResult<Self> {
        if features.len() != labels.len() {
            return Err(ZfpError::new_err("features and labels differ in length"));
        }
        let d = features.first().map_or(0, Vec::len);
        let weights = weights.unwrap_or_else(|| vec![1; labels.len()]);
        if weights.len() != labels.len() {
            return Err(ZfpError::new_err("weights and labels differ in length"));
        }
        let samples = features
            .into_iter()
            .zip(labels)
            .zip(weights)
            .map(|((x, y), w)| Ok(Sample::new(x, label_of(y)?).with_weight(w)))
            .collect::<PyResult<Vec<_>>>()?;
        let mut inner = LabeledDataset::from_samples(d, samples).map_err(err)?;
        if let Some(names) = feature_names {
            inner = LabeledDataset::from_parts(
                names,
                inner.feature_kinds().to_vec(),
                inner.features().to_vec(),
                inner.labels().to_vec(),
                inner.weights().to_vec(),
                inner.codes().clone(),
            )
            .map_err(err)?;
        }
        Ok(PyDataset { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, label_col="label", positive_labels=vec!["1".to_string()], drop_cols=vec![], categorical_cols=vec![]))]
    fn from_csv(
        path: &str,
        label_col: &str,
        positive_labels: Vec<String>,
        drop_cols: Vec<String>,
        categorical_cols: Vec<String>,
    ) -> PyResult<Self> {
        let opts = CsvOptions {
            label_column: label_col.into(),
            positive_labels,
            negative_labels: None,
            drop_columns: drop_cols,
            categorical_columns: categorical_cols,
            codes: None,
        };
        Ok(PyDataset {
            inner: load_csv(path, &opts).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_kdd(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_kdd(path, None).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_powergrid(path: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: load_powergrid(path, None).map_err(err)?,
        })
    }

    /// Built-in constellation, e.g. `"outliers"` or `"separable"`.
    #[staticmethod]
    #[pyo3(signature = (preset, seed=0))]
    fn synth(preset: &str, seed: u64) -> PyResult<Self> {
        let p = Preset::from_name(preset).ok_or_else(|| ZfpError::new_err(format!("unknown preset {preset:?}")))?;
        Ok(PyDataset {
            inner: synth_constellation(&p.spec(), seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        Preset::ALL.iter().map(|p| p.name()).collect()
    }

    fn subsample(&self, n: usize, seed: u64) -> PyResult<Self> {
        Ok(PyDataset {
            inner: self.inner.subsample(n, seed).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn n_pos(&self) -> usize {
        self.inner.n_pos()
    }

    #[getter]
    fn n_neg(&self) -> usize {
        self.inner.n_neg()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.inner.feature_names().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(pyo3::exceptions::PyIndexError::new_err(i));
        }
        Ok(self.inner.row(i).to_vec())
    }

    #[getter]
    fn labels(&self) -> Vec<i64> {
        self.inner.labels().iter().map(|l| l.is_positive() as i64).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n={}, features={}, attacks={})",
            self.inner.len(),
            self.inner.n_features(),
            self.inner.n_pos()
        )
    }
}

/// Binary decision tree; `predict` returns 1 for attack.
#[pyclass(name = "Tree", frozen)]
struct PyTree {
    inner: DecisionTree,
}

#[pymethods]
impl PyTree {
    #[staticmethod]
    #[pyo3(signature = (ds, max_depth=None, min_leaf=1, min_impurity_decrease=0.0))]
    fn fit(ds: &PyDataset, max_depth: Option<usize>, min_leaf: u64, min_impurity_decrease: f64) -> PyResult<Self> {
        let cfg = cart_config(max_depth, min_leaf, min_impurity_decrease)?;
        Ok(PyTree {
            inner: fit(&ds.inner, &cfg).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyTree {
            inner: DecisionTree::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<i64> {
        Ok(self.inner.predict(&x).map_err(err)?.is_positive() as i64)
    }

    fn evaluate(&self, ds: &PyDataset) -> PyResult<Counts> {
        Ok(counts(&evaluate(&self.inner, &ds.inner).map_err(err)?))
    }

    #[getter]
    fn n_leaves(&self) -> usize {
        self.inner.n_leaves()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// Firewall rules; REJECT rules over a default allow unless `accept`.
    #[pyo3(signature = (accept=false))]
    fn rules(&self, accept: bool) -> PyRuleSet {
        let polarity = if accept {
            Polarity::AcceptRules
        } else {
            Polarity::RejectRules
        };
        PyRuleSet {
            inner: extract_rules_with(&self.inner, polarity),
        }
    }
}

#[pyclass(name = "RuleSet", frozen)]
struct PyRuleSet {
    inner: RuleSet,
}

#[pymethods]
impl PyRuleSet {
    /// Parse the machine format.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyRuleSet {
            inner: RuleSet::parse_machine(text).map_err(err)?,
        })
    }

    /// `"ALLOW"` or `"REJECT"`.
    fn apply(&self, x: Vec<f64>) -> PyResult<&'static str> {
        Ok(match self.inner.apply(&x).map_err(err)? {
            Action::Allow => "ALLOW",
            Action::Reject => "REJECT",
        })
    }

    /// `"text"` or `"machine"`.
    #[pyo3(signature = (format="text"))]
    fn render(&self, format: &str) -> PyResult<String> {
        let f = match format {
            "text" => Format::Text,
            "machine" => Format::Machine,
            other => return Err(ZfpError::new_err(format!("unknown rule format {other:?}"))),
        };
        Ok(self.inner.render(f))
    }

    fn is_disjoint(&self) -> bool {
        self.inner.check_disjoint().disjoint
    }

    fn __len__(&self) -> usize {
        self.inner.rules.len()
    }
}

#[pyclass(name = "SwarmResult", frozen)]
struct PySwarmResult {
    tree: DecisionTree,
    #[pyo3(get)]
    fitness: u64,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    target_reached: bool,
    confusion: ConfusionMatrix,
    best_fitness: Vec<u64>,
    checkpoints: Vec<(usize, ConfusionMatrix)>,
}

#[pymethods]
impl PySwarmResult {
    #[getter]
    fn tree(&self) -> PyTree {
        PyTree { inner: self.tree.clone() }
    }

    #[getter]
    fn confusion(&self) -> Counts {
        counts(&self.confusion)
    }

    /// Best fitness after initialisation and after each iteration.
    #[getter]
    fn best_fitness(&self) -> Vec<u64> {
        self.best_fitness.clone()
    }

    #[getter]
    fn checkpoints(&self) -> Vec<(usize, Counts)> {
        self.checkpoints.iter().map(|(i, cm)| (*i, counts(cm))).collect()
    }
}

/// Swarm search for the largest attack set a tree can flag with zero
/// false positives.
#[pyfunction]
#[pyo3(signature = (
    ds, *, population=5, k_growth=1.5, max_iters=1000, target_fn=0,
    checkpoints=DEFAULT_CHECKPOINTS.to_vec(), best_weight=4.0, seed=0, workers=1,
    max_depth=None, min_leaf=1, min_impurity_decrease=0.0,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    ds: &PyDataset,
    population: usize,
    k_growth: f64,
    max_iters: usize,
    target_fn: u64,
    checkpoints: Vec<usize>,
    best_weight: f64,
    seed: u64,
    workers: usize,
    max_depth: Option<usize>,
    min_leaf: u64,
    min_impurity_decrease: f64,
) -> PyResult<PySwarmResult> {
    let cart = cart_config(max_depth, min_leaf, min_impurity_decrease)?;
    let cfg = SwarmConfig {
        population,
        k_growth,
        max_iterations: max_iters,
        target_fn,
        checkpoints,
        best_weight,
        seed,
        ..SwarmConfig::default()
    };
    let data = &ds.inner;
    let run = py.detach(|| swarm::run(data, &cart, &cfg, workers)).map_err(err)?;
    Ok(PySwarmResult {
        fitness: run.best.fitness,
        iterations: run.iterations,
        target_reached: run.target_reached,
        confusion: run.best.full_confusion,
        best_fitness: run.log.best_fitness,
        checkpoints: run.checkpoints.iter().map(|c| (c.iteration, c.confusion)).collect(),
        tree: run.best.boundary,
    })
}

/// Greedy baseline: drop attacks sharing leaves with normal traffic until
/// the tree has no false positives. Returns `(tree, confusion, trace_csv)`.
#[pyfunction]
#[pyo3(signature = (ds, *, max_depth=None, min_leaf=1, min_impurity_decrease=0.0))]
fn removal(
    ds: &PyDataset,
    max_depth: Option<usize>,
    min_leaf: u64,
    min_impurity_decrease: f64,
) -> PyResult<(PyTree, Counts, String)> {
    let cart = cart_config(max_depth, min_leaf, min_impurity_decrease)?;
    let r = zfp_core::removal::run_removal(&ds.inner, &cart).map_err(err)?;
    Ok((PyTree { inner: r.model }, counts(&r.full_confusion), r.trace.to_csv()))
}

/// Cost-weighted linear soft-margin fit. `c1` weighs normal-traffic slack,
/// `c2` attack slack.
#[pyfunction]
fn fit_zsvm(py: Python<'_>, ds: &PyDataset, c1: f64, c2: f64) -> PyResult<Py<pyo3::types::PyDict>> {
    let costs = CostConfig::new(c1, c2).map_err(err)?;
    let r = zsvm::fit_zsvm(&ds.inner, &costs, &SolverConfig::default()).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("a", r.boundary.a.clone())?;
    d.set_item("b0", r.boundary.b0)?;
    d.set_item("gutter", r.gutter)?;
    d.set_item("objective", r.objective)?;
    d.set_item("converged", r.converged)?;
    d.set_item("confusion", counts(&r.confusion))?;
    Ok(d.unbind())
}

/// Sweep `(c1, c2)` cells; returns the CSV table.
#[pyfunction]
fn sweep_costs(ds: &PyDataset, grid: Vec<(f64, f64)>) -> PyResult<String> {
    let cells = grid
        .into_iter()
        .map(|(c1, c2)| CostConfig::new(c1, c2))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let rows = zsvm::sweep_costs(&ds.inner, &cells, &SolverConfig::default()).map_err(err)?;
    let mut buf = Vec::new();
    zsvm::write_sweep_csv(&rows, &mut buf).map_err(|e| ZfpError::new_err(e.to_string()))?;
    Ok(String::from_utf8_lossy(&buf).into_owned())
}

#[pymodule]
fn zfp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ZfpError", m.py().get_type::<ZfpError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTree>()?;
    m.add_class::<PyRuleSet>()?;
    m.add_class::<PySwarmResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(removal, m)?)?;
    m.add_function(wrap_pyfunction!(fit_zsvm, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_costs, m)?)?;
    Ok(())
}
