//! Multinomial logistic classifier over frozen document embeddings, trained
//! on pseudo labels and refined by confidence-thresholded self-training.

mod io;
mod self_train;
mod train;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scalar::{argmax, softmax, Scalar};
use crate::store::{EmbeddingStore, StoreError};

pub use io::{load_model, save_model};
pub use self_train::{self_train, RoundReport, SelfTrainOutcome, StopReason};
pub use train::{loss_and_gradient, train, train_on, Dataset, Gradient};

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("no labeled examples")]
    EmptyLabels,
    #[error("labels cover a single class; at least two are needed")]
    DegenerateLabels,
    #[error("label {class_id} is out of range for {n_classes} classes")]
    LabelOutOfRange { class_id: usize, n_classes: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("model file: {0}")]
    ModelFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    /// Self-training keeps predictions whose confidence exceeds this.
    pub gamma: f64,
    pub max_st_rounds: usize,
    /// Self-training stops once fewer than this fraction of labels change.
    pub stop_frac: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 30,
            l2: 1e-4,
            batch_size: 32,
            gamma: 0.8,
            max_st_rounds: 10,
            stop_frac: 0.01,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |msg: String| Err(ClassifierError::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad(format!("l2 must be non-negative, got {}", self.l2));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.stop_frac > 0.0 && self.stop_frac < 1.0) {
            return bad(format!("stop_frac must lie in (0, 1), got {}", self.stop_frac));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction<S> {
    pub class_id: usize,
    /// Largest softmax probability.
    pub confidence: S,
}

/// `C × dim` weights (row-major) plus a bias per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier<S> {
    n_classes: usize,
    dim: usize,
    weights: Vec<S>,
    bias: Vec<S>,
    seed: u64,
}

impl<S: Scalar> LinearClassifier<S> {
    pub fn zeros(n_classes: usize, dim: usize, seed: u64) -> Self {
        LinearClassifier { n_classes, dim, weights: vec![S::zero(); n_classes * dim], bias: vec![S::zero(); n_classes], seed }
    }

    pub fn from_parts(n_classes: usize, dim: usize, weights: Vec<S>, bias: Vec<S>, seed: u64) -> Result<Self, ClassifierError> {
        if weights.len() != n_classes * dim || bias.len() != n_classes {
            return Err(ClassifierError::ModelFormat(format!(
                "expected {n_classes}x{dim} weights and {n_classes} biases, got {} and {}",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|w| !w.is_finite()) {
            return Err(ClassifierError::ModelFormat("non-finite parameter".into()));
        }
        Ok(LinearClassifier { n_classes, dim, weights, bias, seed })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [S] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[S] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [S] {
        &mut self.bias
    }

    pub fn weight_row(&self, class_id: usize) -> &[S] {
        &self.weights[class_id * self.dim..(class_id + 1) * self.dim]
    }

    pub fn logits(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.n_classes)
            .map(|c| self.bias[c] + self.weight_row(c).iter().zip(x).map(|(&w, &v)| w * v).sum::<S>())
            .collect()
    }

    pub fn probabilities(&self, x: &[S]) -> Vec<S> {
        softmax(&self.logits(x))
    }

    pub fn predict_one(&self, x: &[S]) -> Prediction<S> {
        let p = self.probabilities(x);
        let class_id = argmax(&p);
        Prediction { class_id, confidence: p[class_id] }
    }

    pub(crate) fn embedding(&self, store: &EmbeddingStore, id: &str) -> Result<Vec<S>, StoreError> {
        let v = store.doc_vector(id)?;
        if v.len() != self.dim {
            return Err(StoreError::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(v.iter().map(|&x| S::of_f32(x)).collect())
    }
}

/// Predicts every id; fails on the first id without a vector.
pub fn predict<S: Scalar, I: AsRef<str> + Sync>(
    model: &LinearClassifier<S>,
    store: &EmbeddingStore,
    ids: &[I],
) -> Result<Vec<Prediction<S>>, ClassifierError> {
    ids.par_iter()
        .map(|id| Ok(model.predict_one(&model.embedding(store, id.as_ref())?)))
        .collect()
}
