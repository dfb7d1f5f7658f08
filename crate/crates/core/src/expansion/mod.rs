//! Iterative label-name expansion.
//!
//! Each round retrieves documents with the current queries, builds per-class
//! term statistics over the retrieved documents only, scores candidates
//! locally and globally, fuses the two rankings and appends the winning word
//! to every class's query. Rounds are strictly sequential; classes within a
//! round are scored in parallel and merged in class order.

mod scoring;
mod stats;

use std::collections::HashMap;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, LabelSpec};
use crate::retrieval::{dedup_assign, retrieve_all, PseudoLabelSet, RetrievalError};
use crate::store::{EmbeddingStore, QueryEncoder, StoreError};

pub use scoring::{
    candidate_pool, global_score, local_pool, local_score, rank_candidates, select_expansion, GlobalScores,
    KeywordCandidate,
};
pub use stats::{ClassTermStats, TermStatistics};

#[derive(Debug, thiserror::Error)]
pub enum ExpansionError {
    #[error("class tf exceeds corpus tf for {0:?}")]
    InconsistentCounts(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("class {0}: no candidate keywords left after exclusion")]
    EmptyCandidatePool(usize),
    #[error("pseudo-labeled document {0:?} is not in the corpus")]
    UnknownDocument(String),
    #[error("class {class_id}: {source}")]
    Semantic { class_id: usize, source: StoreError },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Labels(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    /// Documents retrieved per class.
    pub k: usize,
    /// Size of the local candidate pool per class.
    pub m: usize,
    /// Number of expansion rounds.
    pub iterations: usize,
    /// Exponent on the class term frequency in the local score.
    pub alpha: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { k: 100, m: 100, iterations: 5, alpha: 1.0 }
    }
}

/// One line of the expansion log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub iter: usize,
    pub class_id: usize,
    pub token: String,
    pub local: f64,
    pub global: f64,
    pub fused: f64,
}

#[derive(Debug, Clone)]
pub struct ExpansionOutcome {
    pub specs: Vec<LabelSpec>,
    /// Pseudo labels from the original label names.
    pub initial_labels: PseudoLabelSet,
    /// Pseudo labels retrieved with the final expanded queries.
    pub labels: PseudoLabelSet,
    pub log: Vec<ExpansionRecord>,
    /// `(iteration, class_id)` pairs that selected nothing.
    pub skipped: Vec<(usize, usize)>,
    /// Candidates dropped for lacking a semantic vector, summed over rounds.
    pub dropped_candidates: usize,
}

impl ExpansionOutcome {
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

/// Retrieve, then dedup, with the current queries.
pub fn retrieve_labels(
    store: &EmbeddingStore,
    encoder: &dyn QueryEncoder,
    specs: &[LabelSpec],
    k: usize,
) -> Result<PseudoLabelSet, RetrievalError> {
    Ok(dedup_assign(&retrieve_all(store.docs(), encoder, specs, k)?))
}

enum RoundPick {
    Picked(KeywordCandidate<f64>),
    Skipped,
}

fn pick_for_class(
    store: &EmbeddingStore,
    stats: &TermStatistics,
    spec: &LabelSpec,
    cfg: &ExpansionConfig,
) -> Result<(RoundPick, usize), ExpansionError> {
    let class_stats = &stats.per_class[spec.class_id];
    if class_stats.n_docs == 0 {
        return Ok((RoundPick::Skipped, 0));
    }
    let local = local_score(class_stats, &stats.global_tf, stats.avg_tokens, cfg.alpha)?;
    let pool = candidate_pool(&local, spec, cfg.m);
    if pool.is_empty() {
        return Ok((RoundPick::Skipped, 0));
    }
    let global = global_score(store.sem_words(), &pool, &spec.name)
        .map_err(|source| ExpansionError::Semantic { class_id: spec.class_id, source })?;
    match select_expansion(&local, &global.scores, spec, cfg.m) {
        Ok(best) => Ok((RoundPick::Picked(best), global.dropped)),
        Err(ExpansionError::EmptyCandidatePool(_)) => Ok((RoundPick::Skipped, global.dropped)),
        Err(e) => Err(e),
    }
}

/// Runs `cfg.iterations` expansion rounds starting from `specs`.
///
/// With zero iterations the specs come back unchanged and `labels` equals
/// the initial retrieval.
pub fn run_expansion(
    store: &EmbeddingStore,
    encoder: &dyn QueryEncoder,
    corpus: &Corpus,
    specs: &[LabelSpec],
    cfg: &ExpansionConfig,
) -> Result<ExpansionOutcome, ExpansionError> {
    if cfg.alpha.is_nan() || cfg.alpha <= 0.0 {
        return Err(ExpansionError::InvalidParameter(format!("alpha must be positive, got {}", cfg.alpha)));
    }
    let n_classes = specs.len();
    let mut specs = specs.to_vec();
    let initial_labels = retrieve_labels(store, encoder, &specs, cfg.k)?;
    let mut labels = initial_labels.clone();
    let mut log = Vec::new();
    let mut skipped = Vec::new();
    let mut dropped_candidates = 0;

    for iter in 1..=cfg.iterations {
        let stats = TermStatistics::from_pseudo_labels(&labels, corpus, n_classes)?;
        let picks = specs
            .par_iter()
            .map(|spec| pick_for_class(store, &stats, spec, cfg))
            .collect::<Result<Vec<_>, _>>()?;

        for (spec, (pick, dropped)) in specs.iter_mut().zip(picks) {
            dropped_candidates += dropped;
            match pick {
                RoundPick::Picked(best) => {
                    info!("round {iter}: class {} += {:?} (fused {:.4})", spec.class_id, best.token, best.fused);
                    spec.push_expansion(&best.token)?;
                    log.push(ExpansionRecord {
                        iter,
                        class_id: spec.class_id,
                        token: best.token,
                        local: best.local_score,
                        global: best.global_score,
                        fused: best.fused,
                    });
                }
                RoundPick::Skipped => {
                    warn!("round {iter}: class {} has no candidate keyword; query unchanged", spec.class_id);
                    skipped.push((iter, spec.class_id));
                }
            }
        }
        labels = retrieve_labels(store, encoder, &specs, cfg.k)?;
    }

    Ok(ExpansionOutcome { specs, initial_labels, labels, log, skipped, dropped_candidates })
}

/// Tokens selected per class, in selection order.
pub fn expansions_by_class(log: &[ExpansionRecord]) -> HashMap<usize, Vec<String>> {
    let mut out: HashMap<usize, Vec<String>> = HashMap::new();
    for r in log {
        out.entry(r.class_id).or_default().push(r.token.clone());
    }
    out
}
