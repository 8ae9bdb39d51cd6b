//! The interface the swarm engine needs from a core classifier.

use crate::cart::{self, DecisionTree, Presorted, TrainConfig};
use crate::dataset::{Label, LabeledDataset};
use crate::error::Result;

pub trait CoreClassifier: Sync {
    type Model: Clone + Send + Sync;
    /// Work shared by every fit on one dataset, computed once per run.
    type Prepared: Send + Sync;

    fn prepare(&self, ds: &LabeledDataset) -> Self::Prepared;

    /// Fit on `ds` with per-sample weights; weight 0 excludes a sample.
    fn fit(&self, ds: &LabeledDataset, prepared: &Self::Prepared, weights: &[u64])
        -> Result<Self::Model>;

    fn predict(&self, model: &Self::Model, x: &[f64]) -> Label;
}

/// CART with a fixed training configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cart(pub TrainConfig);

impl CoreClassifier for Cart {
    type Model = DecisionTree;
    type Prepared = Presorted;

    fn prepare(&self, ds: &LabeledDataset) -> Presorted {
        Presorted::new(ds)
    }

    fn fit(&self, ds: &LabeledDataset, prepared: &Presorted, weights: &[u64]) -> Result<DecisionTree> {
        cart::fit_weighted(ds, weights, &self.0, Some(prepared))
    }

    fn predict(&self, model: &DecisionTree, x: &[f64]) -> Label {
        model.predict_unchecked(x)
    }
}
