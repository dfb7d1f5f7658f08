use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ClassifierError, LinearClassifier, TrainConfig};
use crate::retrieval::PseudoLabelSet;
use crate::scalar::Scalar;
use crate::store::EmbeddingStore;

/// Dense training matrix (row-major) with one hard label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S> {
    pub dim: usize,
    pub xs: Vec<S>,
    pub ys: Vec<usize>,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(dim: usize) -> Self {
        Dataset { dim, xs: Vec::new(), ys: Vec::new() }
    }

    pub fn push(&mut self, x: &[S], y: usize) {
        assert_eq!(x.len(), self.dim, "row length must equal dataset dim");
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows in pseudo-label (id) order.
    pub fn from_labels(store: &EmbeddingStore, labels: &PseudoLabelSet, n_classes: usize) -> Result<Self, ClassifierError> {
        let mut data = Dataset::new(store.dim());
        for (id, a) in labels.iter() {
            if a.class_id >= n_classes {
                return Err(ClassifierError::LabelOutOfRange { class_id: a.class_id, n_classes });
            }
            let x: Vec<S> = store.doc_vector(id)?.iter().map(|&v| S::of_f32(v)).collect();
            data.push(&x, a.class_id);
        }
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient<S> {
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

/// Mean cross-entropy over `rows` plus `l2 * ||W||²`, and its exact
/// gradient. The bias is not regularized.
pub fn loss_and_gradient<S: Scalar>(
    model: &LinearClassifier<S>,
    data: &Dataset<S>,
    rows: &[usize],
    l2: S,
) -> (S, Gradient<S>) {
    let (c, dim) = (model.n_classes(), model.dim());
    let mut gw = vec![S::zero(); c * dim];
    let mut gb = vec![S::zero(); c];
    let mut loss = S::zero();
    let inv_n = S::one() / S::of_usize(rows.len().max(1));

    for &i in rows {
        let x = data.row(i);
        let y = data.ys[i];
        let z = model.logits(x);
        let max = z.iter().copied().fold(S::neg_infinity(), S::max);
        let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<S>().ln();
        loss = loss + (lse - z[y]);
        for k in 0..c {
            let resid = (z[k] - lse).exp() - if k == y { S::one() } else { S::zero() };
            gb[k] = gb[k] + resid;
            let row = &mut gw[k * dim..(k + 1) * dim];
            for (g, &xj) in row.iter_mut().zip(x) {
                *g = *g + resid * xj;
            }
        }
    }

    let two_l2 = l2 + l2;
    loss = loss * inv_n + l2 * model.weights().iter().map(|&w| w * w).sum::<S>();
    for (g, &w) in gw.iter_mut().zip(model.weights()) {
        *g = *g * inv_n + two_l2 * w;
    }
    for g in &mut gb {
        *g = *g * inv_n;
    }
    (loss, Gradient { weights: gw, bias: gb })
}

/// Mini-batch gradient descent from an all-zero model. Batches follow a
/// per-epoch shuffle drawn from a generator seeded with `cfg.seed`.
pub fn train_on<S: Scalar>(
    data: &Dataset<S>,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<LinearClassifier<S>, ClassifierError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ClassifierError::EmptyLabels);
    }
    if let Some(&y) = data.ys.iter().find(|&&y| y >= n_classes) {
        return Err(ClassifierError::LabelOutOfRange { class_id: y, n_classes });
    }
    if data.ys.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(ClassifierError::DegenerateLabels);
    }

    let mut model = LinearClassifier::zeros(n_classes, data.dim, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let lr = S::of(cfg.learning_rate);
    let l2 = S::of(cfg.l2);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (_, grad) = loss_and_gradient(&model, data, batch, l2);
            for (w, g) in model.weights_mut().iter_mut().zip(&grad.weights) {
                *w = *w - lr * *g;
            }
            for (b, g) in model.bias_mut().iter_mut().zip(&grad.bias) {
                *b = *b - lr * *g;
            }
        }
    }
    Ok(model)
}

/// Trains on the documents of `labels`, each with its assigned class.
pub fn train<S: Scalar>(
    store: &EmbeddingStore,
    labels: &PseudoLabelSet,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<LinearClassifier<S>, ClassifierError> {
    if labels.is_empty() {
        return Err(ClassifierError::EmptyLabels);
    }
    train_on(&Dataset::from_labels(store, labels, n_classes)?, n_classes, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::predict;
    use crate::store::{StoreError, VectorTable};
    use rand_distr::{Distribution, Normal};

    fn two_clusters(seed: u64) -> (EmbeddingStore, PseudoLabelSet) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut docs = VectorTable::new(3);
        let mut labels = PseudoLabelSet::default();
        for i in 0..40 {
            let class = i % 2;
            let centre = if class == 0 { [2.0, 0.0, 1.0] } else { [-2.0, 0.0, -1.0] };
            let v: Vec<f32> = centre.iter().map(|c| (c + noise.sample(&mut rng)) as f32).collect();
            docs.push(format!("d{i:02}"), &v).unwrap();
            labels.insert(format!("d{i:02}"), class, 1.0);
        }
        (EmbeddingStore::new(docs, VectorTable::new(3), VectorTable::new(3)).unwrap(), labels)
    }

    /// Perceptron run to convergence certifies the clusters are linearly
    /// separable before the classifier is asked to fit them.
    fn perceptron_separates(store: &EmbeddingStore, labels: &PseudoLabelSet) -> bool {
        let mut w = [0f64; 4];
        for _ in 0..1000 {
            let mut mistakes = 0;
            for (id, a) in labels.iter() {
                let x = store.doc_vector(id).unwrap();
                let y = if a.class_id == 0 { 1.0 } else { -1.0 };
                let s = w[3] + (0..3).map(|j| w[j] * x[j] as f64).sum::<f64>();
                if y * s <= 0.0 {
                    mistakes += 1;
                    for j in 0..3 {
                        w[j] += y * x[j] as f64;
                    }
                    w[3] += y;
                }
            }
            if mistakes == 0 {
                return true;
            }
        }
        false
    }

    #[test]
    fn separable_clusters_fit_perfectly() {
        let (store, labels) = two_clusters(7);
        assert!(perceptron_separates(&store, &labels));
        let model: LinearClassifier<f64> = train(&store, &labels, 2, &TrainConfig::default()).unwrap();
        let ids: Vec<&str> = labels.iter().map(|(id, _)| id).collect();
        let preds = predict(&model, &store, &ids).unwrap();
        let correct = preds.iter().zip(labels.iter()).filter(|(p, (_, a))| p.class_id == a.class_id).count();
        assert_eq!(correct, 40);

        let model32: LinearClassifier<f32> = train(&store, &labels, 2, &TrainConfig::default()).unwrap();
        let preds32 = predict(&model32, &store, &ids).unwrap();
        assert!(preds32.iter().zip(&preds).all(|(a, b)| a.class_id == b.class_id));
    }

    #[test]
    fn single_class_is_degenerate() {
        let (store, mut labels) = two_clusters(1);
        for a in labels.assignments.values_mut() {
            a.class_id = 1;
        }
        assert!(matches!(train::<f64>(&store, &labels, 2, &TrainConfig::default()), Err(ClassifierError::DegenerateLabels)));
        assert!(matches!(
            train::<f64>(&store, &PseudoLabelSet::default(), 2, &TrainConfig::default()),
            Err(ClassifierError::EmptyLabels)
        ));
    }

    #[test]
    fn missing_vector_and_bad_label() {
        let (store, mut labels) = two_clusters(2);
        labels.insert("ghost", 0, 1.0);
        assert!(matches!(
            train::<f64>(&store, &labels, 2, &TrainConfig::default()),
            Err(ClassifierError::Store(StoreError::MissingDocVector(_)))
        ));
        let (store, mut labels) = two_clusters(2);
        labels.insert("d00", 5, 1.0);
        assert!(matches!(
            train::<f64>(&store, &labels, 2, &TrainConfig::default()),
            Err(ClassifierError::LabelOutOfRange { class_id: 5, n_classes: 2 })
        ));
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (store, labels) = two_clusters(3);
        let cfg = TrainConfig { epochs: 0, ..Default::default() };
        let model: LinearClassifier<f64> = train(&store, &labels, 3, &cfg).unwrap();
        assert_eq!(model, LinearClassifier::zeros(3, 3, cfg.seed));
        let p = model.predict_one(&[1.0, 2.0, 3.0]);
        assert!((p.confidence - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn deterministic_given_seed() {
        let (store, labels) = two_clusters(4);
        let cfg = TrainConfig { epochs: 5, ..Default::default() };
        let a: LinearClassifier<f64> = train(&store, &labels, 2, &cfg).unwrap();
        let b: LinearClassifier<f64> = train(&store, &labels, 2, &cfg).unwrap();
        let bits = |m: &LinearClassifier<f64>| m.weights().iter().chain(m.bias()).map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c: LinearClassifier<f64> = train(&store, &labels, 2, &TrainConfig { seed: 99, ..cfg }).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn loss_decreases() {
        let (store, labels) = two_clusters(5);
        let data: Dataset<f64> = Dataset::from_labels(&store, &labels, 2).unwrap();
        let rows: Vec<usize> = (0..data.len()).collect();
        let zero = LinearClassifier::zeros(2, 3, 0);
        let (l0, _) = loss_and_gradient(&zero, &data, &rows, 0.0);
        assert!((l0 - std::f64::consts::LN_2).abs() < 1e-12);
        let model = train_on(&data, 2, &TrainConfig::default()).unwrap();
        let (l1, _) = loss_and_gradient(&model, &data, &rows, 0.0);
        assert!(l1 < 0.1 * l0);
    }
}
