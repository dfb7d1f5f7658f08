use log::warn;
use serde::{Deserialize, Serialize};

use super::{predict, train_on, ClassifierError, Dataset, LinearClassifier, Prediction, TrainConfig};
use crate::scalar::Scalar;
use crate::store::EmbeddingStore;

/// One line of the self-training report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub n_confident: usize,
    pub change_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Fewer than `stop_frac` of the documents changed label.
    Converged,
    /// `max_st_rounds` reached.
    RoundCap,
    /// No prediction cleared the confidence threshold.
    NoConfidentExamples,
    /// Every confident prediction fell in one class.
    SingleConfidentClass,
}

#[derive(Debug, Clone)]
pub struct SelfTrainOutcome<S> {
    pub model: LinearClassifier<S>,
    pub rounds: usize,
    pub history: Vec<RoundReport>,
    pub stop: StopReason,
}

impl<S> SelfTrainOutcome<S> {
    pub fn report_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|r| serde_json::to_string(r).expect("report serializes") + "\n")
            .collect()
    }
}

/// Refines `model` on its own confident predictions over `ids`.
///
/// Each round keeps the documents whose top probability exceeds
/// `cfg.gamma`, retrains a fresh model on those hard labels with the same
/// config, and measures the fraction of `ids` whose predicted label moved.
/// Stops when that fraction drops below `cfg.stop_frac`, or after
/// `cfg.max_st_rounds` rounds.
pub fn self_train<S: Scalar, I: AsRef<str> + Sync>(
    model: LinearClassifier<S>,
    store: &EmbeddingStore,
    ids: &[I],
    cfg: &TrainConfig,
) -> Result<SelfTrainOutcome<S>, ClassifierError> {
    cfg.validate()?;
    if ids.is_empty() {
        return Err(ClassifierError::EmptyLabels);
    }
    let n_classes = model.n_classes();
    let gamma = S::of(cfg.gamma);
    let mut model = model;
    let mut previous: Vec<Prediction<S>> = predict(&model, store, ids)?;
    let mut history = Vec::new();

    let mut stop = StopReason::RoundCap;
    while history.len() < cfg.max_st_rounds {
        let mut data = Dataset::new(store.dim());
        for (id, p) in ids.iter().zip(&previous) {
            if p.confidence > gamma {
                data.push(&model.embedding(store, id.as_ref())?, p.class_id);
            }
        }
        if data.is_empty() {
            warn!("self-training: no prediction above gamma={}; keeping current model", cfg.gamma);
            stop = StopReason::NoConfidentExamples;
            break;
        }
        let next = match train_on(&data, n_classes, cfg) {
            Ok(m) => m,
            Err(ClassifierError::DegenerateLabels) => {
                warn!("self-training: all confident predictions share one class; keeping current model");
                stop = StopReason::SingleConfidentClass;
                break;
            }
            Err(e) => return Err(e),
        };
        let current = predict(&next, store, ids)?;
        let changed = current.iter().zip(&previous).filter(|(a, b)| a.class_id != b.class_id).count();
        let change_frac = changed as f64 / ids.len() as f64;
        history.push(RoundReport { round: history.len() + 1, n_confident: data.len(), change_frac });
        model = next;
        previous = current;
        if change_frac < cfg.stop_frac {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(SelfTrainOutcome { model, rounds: history.len(), history, stop })
}
