//! Weakly supervised document classification from label names.
//!
//! The pipeline retrieves documents for each label name by dense search,
//! widens each label's query with keywords mined from the retrieved
//! documents, trains a linear classifier on the resulting pseudo labels and
//! refines it by self-training on its own confident predictions.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root pick `f64`, with `*32` variants for single precision.

pub mod classifier;
pub mod corpus;
pub mod eval;
pub mod expansion;
pub mod pipeline;
pub mod retrieval;
pub mod scalar;
pub mod store;
pub mod synthetic;

pub use classifier::{ClassifierError, LinearClassifier, Prediction, SelfTrainOutcome, StopReason, TrainConfig};
pub use corpus::{Corpus, CorpusError, Document, LabelSpec};
pub use eval::{EvalError, MetricsReport, PilotReport};
pub use expansion::{ExpansionConfig, ExpansionError, ExpansionOutcome, ExpansionRecord};
pub use pipeline::{PipelineConfig, PipelineError, PipelineOutcome};
pub use retrieval::{Hit, PseudoLabelSet, RetrievalError};
pub use scalar::Scalar;
pub use store::{EmbeddingStore, QueryEncoder, StoreError, VectorTable};

pub type Classifier = LinearClassifier<f64>;
pub type Classifier32 = LinearClassifier<f32>;
pub type ClassifierPrediction = Prediction<f64>;
pub type ClassifierPrediction32 = Prediction<f32>;
pub type SelfTraining = SelfTrainOutcome<f64>;
pub type SelfTraining32 = SelfTrainOutcome<f32>;
pub type Candidate = expansion::KeywordCandidate<f64>;
pub type Candidate32 = expansion::KeywordCandidate<f32>;
