//! End-to-end runs: retrieval, expansion, training, self-training and
//! evaluation, with every intermediate written to a run directory named by
//! a hash of the configuration.

mod error;
mod sweep;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{predict, save_model, self_train, train, LinearClassifier, Prediction, SelfTrainOutcome, TrainConfig};
use crate::corpus::{load_corpus, load_label_specs, save_label_specs, Corpus, LabelSpec};
use crate::eval::{f1_report, MetricsReport};
use crate::expansion::{run_expansion, ExpansionConfig, ExpansionOutcome};
use crate::retrieval::PseudoLabelSet;
use crate::store::{load_store, EmbeddingStore, ExternalEmbedder, MeanWordEncoder, QueryEncoder};

pub use error::{ErrorKind, PipelineError, Stage};
pub use sweep::{sweep, RowOutcome, SweepParam, SweepReport, SweepRow, SweepScores};

/// Classifier hyperparameters other than the confidence threshold and the
/// seed, which live at the top level of [`PipelineConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub max_st_rounds: usize,
    pub stop_frac: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            l2: t.l2,
            batch_size: t.batch_size,
            max_st_rounds: t.max_st_rounds,
            stop_frac: t.stop_frac,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub labels: PathBuf,
    pub doc_vectors: PathBuf,
    pub word_vectors: PathBuf,
    pub sem_vectors: PathBuf,
    /// Command for an external query embedder; mean word vectors otherwise.
    pub external_embedder: Option<String>,
    pub k: usize,
    pub m: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub train: TrainSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Omit wall-clock metadata so that reruns are byte-identical.
    pub deterministic: bool,
    /// Replace an existing run directory instead of refusing.
    pub overwrite: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let e = ExpansionConfig::default();
        PipelineConfig {
            corpus: PathBuf::new(),
            labels: PathBuf::new(),
            doc_vectors: PathBuf::new(),
            word_vectors: PathBuf::new(),
            sem_vectors: PathBuf::new(),
            external_embedder: None,
            k: e.k,
            m: e.m,
            gamma: TrainConfig::default().gamma,
            alpha: e.alpha,
            iterations: e.iterations,
            train: TrainSettings::default(),
            seed: TrainConfig::default().seed,
            output_dir: PathBuf::from("runs"),
            deterministic: true,
            overwrite: false,
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config. Relative paths resolve against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_against(base);
        }
        Ok(cfg)
    }

    pub fn resolve_against(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.labels,
            &mut self.doc_vectors,
            &mut self.word_vectors,
            &mut self.sem_vectors,
            &mut self.output_dir,
        ] {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig { k: self.k, m: self.m, iterations: self.iterations, alpha: self.alpha }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            l2: t.l2,
            batch_size: t.batch_size,
            gamma: self.gamma,
            max_st_rounds: t.max_st_rounds,
            stop_frac: t.stop_frac,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        for (name, p) in [
            ("corpus", &self.corpus),
            ("labels", &self.labels),
            ("doc_vectors", &self.doc_vectors),
            ("word_vectors", &self.word_vectors),
            ("sem_vectors", &self.sem_vectors),
        ] {
            if p.as_os_str().is_empty() {
                return Err(PipelineError::config(format!("missing path: {name}")));
            }
        }
        if self.k == 0 || self.m == 0 {
            return Err(PipelineError::config("k and m must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(PipelineError::config(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.train_config().validate().map_err(|e| PipelineError::config(e.to_string()))
    }

    /// The config with the output location and run flags reset.
    pub fn canonical(&self) -> PipelineConfig {
        PipelineConfig { output_dir: PathBuf::new(), deterministic: true, overwrite: false, ..self.clone() }
    }

    /// Hex digest of everything that affects results; the output location
    /// and run flags are left out.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(format!("run-{}", self.content_hash()))
    }
}

/// Corpus, label names, vectors and the query encoder for one run.
pub struct Inputs {
    pub corpus: Corpus,
    pub specs: Vec<LabelSpec>,
    pub store: EmbeddingStore,
    external: Option<ExternalEmbedder>,
}

/// Loads the corpus and label names only.
pub fn load_text(cfg: &PipelineConfig) -> Result<(Corpus, Vec<LabelSpec>), PipelineError> {
    let docs = load_corpus(&cfg.corpus).map_err(PipelineError::corpus)?;
    let corpus = Corpus::new(docs).map_err(PipelineError::corpus)?;
    let specs = load_label_specs(&cfg.labels).map_err(PipelineError::corpus)?;
    corpus.check_gold_range(specs.len()).map_err(PipelineError::corpus)?;
    Ok((corpus, specs))
}

impl Inputs {
    pub fn load(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let (corpus, specs) = load_text(cfg)?;
        let store = load_store(&cfg.doc_vectors, &cfg.word_vectors, &cfg.sem_vectors)
            .and_then(|s| s.restricted_to(&corpus))
            .map_err(PipelineError::store)?;
        let external = match &cfg.external_embedder {
            Some(cmd) => Some(ExternalEmbedder::spawn(cmd, store.dim()).map_err(PipelineError::store)?),
            None => None,
        };
        Ok(Inputs { corpus, specs, store, external })
    }

    pub fn from_parts(corpus: Corpus, specs: Vec<LabelSpec>, store: EmbeddingStore) -> Self {
        Inputs { corpus, specs, store, external: None }
    }

    pub fn encoder(&self) -> Box<dyn QueryEncoder + '_> {
        match &self.external {
            Some(e) => Box::new(e),
            None => Box::new(MeanWordEncoder::new(self.store.doc_words())),
        }
    }

    pub fn ids(&self) -> Vec<String> {
        self.corpus.ids().map(str::to_owned).collect()
    }

    pub fn gold(&self) -> Option<HashMap<String, usize>> {
        self.corpus.has_gold().then(|| self.corpus.gold())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub stage1: Option<MetricsReport>,
    pub stage2: Option<MetricsReport>,
    pub full: Option<MetricsReport>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub run_dir: PathBuf,
    pub expansion: ExpansionOutcome,
    pub stage1_model: LinearClassifier<f64>,
    pub stage2_model: LinearClassifier<f64>,
    pub self_training: SelfTrainOutcome<f64>,
    pub predictions: Vec<(String, Prediction<f64>)>,
    pub metrics: StageMetrics,
}

#[derive(Debug, Clone)]
pub struct StageOneOutcome {
    pub run_dir: PathBuf,
    pub labels: PseudoLabelSet,
    pub model: LinearClassifier<f64>,
    pub predictions: Vec<(String, Prediction<f64>)>,
    pub metrics: Option<MetricsReport>,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    class_id: usize,
    confidence: f64,
}

pub fn predictions_jsonl(predictions: &[(String, Prediction<f64>)]) -> String {
    predictions
        .iter()
        .map(|(id, p)| {
            let line = PredictionLine { id, class_id: p.class_id, confidence: p.confidence };
            serde_json::to_string(&line).expect("prediction serializes") + "\n"
        })
        .collect()
}

fn labeled_predictions(
    model: &LinearClassifier<f64>,
    inputs: &Inputs,
    ids: &[String],
) -> Result<Vec<(String, Prediction<f64>)>, PipelineError> {
    let preds = predict(model, &inputs.store, ids).map_err(|e| PipelineError::classifier(Stage::Classifier, e))?;
    Ok(ids.iter().cloned().zip(preds).collect())
}

fn score(
    predictions: &[(String, Prediction<f64>)],
    gold: Option<&HashMap<String, usize>>,
    n_classes: usize,
) -> Result<Option<MetricsReport>, PipelineError> {
    let Some(gold) = gold else { return Ok(None) };
    let pred: HashMap<String, usize> = predictions.iter().map(|(id, p)| (id.clone(), p.class_id)).collect();
    f1_report(&pred, gold, n_classes)
        .map(Some)
        .map_err(|e| PipelineError::new(Stage::Eval, ErrorKind::Stage, e.to_string()))
}

fn ensure_free(dir: &Path, overwrite: bool) -> Result<(), PipelineError> {
    if dir.exists() && !overwrite {
        return Err(PipelineError::config(format!(
            "run directory {} already exists; pass overwrite to replace it",
            dir.display()
        )));
    }
    Ok(())
}

/// Claims `dir` for writing, removing an old one when `overwrite` is set.
fn claim_dir(dir: &Path, overwrite: bool) -> Result<(), PipelineError> {
    ensure_free(dir, overwrite)?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| PipelineError::output(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| PipelineError::output(dir, e))
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| PipelineError::output(&path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("value serializes") + "\n"
}

/// Runs every stage and writes all artifacts into [`PipelineConfig::run_dir`].
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    ensure_free(&cfg.run_dir(), cfg.overwrite)?;
    let inputs = Inputs::load(cfg)?;
    run_loaded(&inputs, cfg)
}

/// [`run_pipeline`] over already loaded inputs.
pub fn run_loaded(inputs: &Inputs, cfg: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let run_dir = cfg.run_dir();
    let n_classes = inputs.specs.len();
    let tcfg = cfg.train_config();
    let ids = inputs.ids();
    let gold = inputs.gold();
    let encoder = inputs.encoder();

    info!("expansion: k={} m={} iterations={}", cfg.k, cfg.m, cfg.iterations);
    let expansion = run_expansion(&inputs.store, encoder.as_ref(), &inputs.corpus, &inputs.specs, &cfg.expansion())
        .map_err(PipelineError::expansion)?;

    let fit = |labels: &PseudoLabelSet| {
        train::<f64>(&inputs.store, labels, n_classes, &tcfg).map_err(|e| PipelineError::classifier(Stage::Classifier, e))
    };
    let stage1_model = fit(&expansion.initial_labels)?;
    let stage2_model = fit(&expansion.labels)?;
    let stage1_preds = labeled_predictions(&stage1_model, inputs, &ids)?;
    let stage2_preds = labeled_predictions(&stage2_model, inputs, &ids)?;

    info!("self-training: gamma={} max rounds={}", tcfg.gamma, tcfg.max_st_rounds);
    let self_training = self_train(stage2_model.clone(), &inputs.store, &ids, &tcfg)
        .map_err(|e| PipelineError::classifier(Stage::SelfTraining, e))?;
    let predictions = labeled_predictions(&self_training.model, inputs, &ids)?;

    let metrics = StageMetrics {
        stage1: score(&stage1_preds, gold.as_ref(), n_classes)?,
        stage2: score(&stage2_preds, gold.as_ref(), n_classes)?,
        full: score(&predictions, gold.as_ref(), n_classes)?,
    };

    claim_dir(&run_dir, cfg.overwrite)?;
    let d = run_dir.as_path();
    write(d, "config.json", to_json(&cfg.canonical()))?;
    write(d, "stage1_labels.jsonl", expansion.initial_labels.to_jsonl())?;
    write(d, "stage2_labels.jsonl", expansion.labels.to_jsonl())?;
    write(d, "expansion_log.jsonl", expansion.log_jsonl())?;
    let expanded = d.join("expanded_labels.jsonl");
    save_label_specs(&expanded, &expansion.specs).map_err(|e| PipelineError::new(Stage::Output, ErrorKind::Stage, e.to_string()))?;
    for (name, model) in
        [("model_stage1.wndr", &stage1_model), ("model_stage2.wndr", &stage2_model), ("model.wndr", &self_training.model)]
    {
        save_model(d.join(name), model).map_err(|e| PipelineError::new(Stage::Output, ErrorKind::Stage, e.to_string()))?;
    }
    write(d, "self_training.jsonl", self_training.report_jsonl())?;
    write(d, "predictions.jsonl", predictions_jsonl(&predictions))?;
    if gold.is_some() {
        write(d, "metrics.json", to_json(&metrics))?;
        let mut table = String::new();
        for (name, m) in [("stage1", &metrics.stage1), ("stage2", &metrics.stage2), ("full", &metrics.full)] {
            if let Some(m) = m {
                table.push_str(&format!("[{name}]\n{}\n", m.to_table()));
            }
        }
        write(d, "metrics.txt", table)?;
    }
    if !cfg.deterministic {
        write_run_info(d, started)?;
    }

    Ok(PipelineOutcome { run_dir, expansion, stage1_model, stage2_model, self_training, predictions, metrics })
}

fn write_run_info(dir: &Path, started: Instant) -> Result<(), PipelineError> {
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let info = serde_json::json!({
        "finished_unix": finished,
        "elapsed_secs": started.elapsed().as_secs_f64(),
    });
    write(dir, "run_info.json", to_json(&info))
}

/// Retrieval with the original label names followed by one training pass;
/// no expansion and no self-training.
pub fn run_stage_one(cfg: &PipelineConfig) -> Result<StageOneOutcome, PipelineError> {
    cfg.validate()?;
    let inputs = Inputs::load(cfg)?;
    stage_one_loaded(&inputs, cfg)
}

pub fn stage_one_loaded(inputs: &Inputs, cfg: &PipelineConfig) -> Result<StageOneOutcome, PipelineError> {
    let run_dir = cfg.output_dir.join(format!("stage1-{}", cfg.content_hash()));
    let n_classes = inputs.specs.len();
    let ids = inputs.ids();
    let encoder = inputs.encoder();
    let labels = crate::expansion::retrieve_labels(&inputs.store, encoder.as_ref(), &inputs.specs, cfg.k)
        .map_err(PipelineError::retrieval)?;
    let model = train::<f64>(&inputs.store, &labels, n_classes, &cfg.train_config())
        .map_err(|e| PipelineError::classifier(Stage::Classifier, e))?;
    let predictions = labeled_predictions(&model, inputs, &ids)?;
    let metrics = score(&predictions, inputs.gold().as_ref(), n_classes)?;

    claim_dir(&run_dir, cfg.overwrite)?;
    write(&run_dir, "stage1_labels.jsonl", labels.to_jsonl())?;
    save_model(run_dir.join("model.wndr"), &model)
        .map_err(|e| PipelineError::new(Stage::Output, ErrorKind::Stage, e.to_string()))?;
    write(&run_dir, "predictions.jsonl", predictions_jsonl(&predictions))?;
    if let Some(m) = &metrics {
        write(&run_dir, "metrics.json", to_json(m))?;
    }
    Ok(StageOneOutcome { run_dir, labels, model, predictions, metrics })
}
