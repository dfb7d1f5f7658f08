//! Exact dense retrieval of label-name queries against document vectors.
//!
//! Relevance is the raw dot product between the query vector and a document
//! vector, accumulated in `f64`. Hits are ordered by descending score with
//! ties broken by ascending document id, so results never depend on the
//! storage order of the document table.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabelSpec;
use crate::store::{QueryEncoder, StoreError, VectorTable};

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query has {got} dimensions, documents have {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {class_id}: {source}")]
    Query { class_id: usize, source: StoreError },
    #[error("cannot write {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("malformed pseudo-label record on line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub class_id: usize,
    pub hits: Vec<Hit>,
}

fn rank_order(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id))
}

fn dot_f32(query: &[f64], doc: &[f32]) -> f64 {
    query.iter().zip(doc).map(|(&q, &d)| q * d as f64).sum()
}

/// The `min(k, n)` highest-scoring documents.
pub fn top_k(docs: &VectorTable, query: &[f64], k: usize) -> Result<Vec<Hit>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if query.len() != docs.dim() {
        return Err(RetrievalError::DimensionMismatch { expected: docs.dim(), got: query.len() });
    }
    let mut hits: Vec<Hit> = docs
        .iter()
        .map(|(id, v)| Hit { id: id.to_owned(), score: dot_f32(query, v) })
        .collect();
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, rank_order);
        hits.truncate(k);
    }
    hits.sort_by(rank_order);
    Ok(hits)
}

/// Retrieves the top-`k` documents for every class query, in class order.
pub fn retrieve_all(
    docs: &VectorTable,
    encoder: &dyn QueryEncoder,
    specs: &[LabelSpec],
    k: usize,
) -> Result<Vec<RetrievalResult>, RetrievalError> {
    specs
        .par_iter()
        .map(|spec| {
            let q = encoder
                .encode(&spec.query_text())
                .map_err(|source| RetrievalError::Query { class_id: spec.class_id, source })?;
            let hits = top_k(docs, &q, k)?;
            Ok(RetrievalResult { class_id: spec.class_id, hits })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub class_id: usize,
    pub score: f64,
}

/// Document id → single pseudo label. Ordered by id so iteration and dumps
/// are deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoLabelSet {
    pub assignments: BTreeMap<String, Assignment>,
}

impl PseudoLabelSet {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Assignment> {
        self.assignments.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Assignment)> {
        self.assignments.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn insert(&mut self, id: impl Into<String>, class_id: usize, score: f64) {
        self.assignments.insert(id.into(), Assignment { class_id, score });
    }

    /// Ids grouped by class; classes without documents get an empty list.
    pub fn ids_by_class(&self, n_classes: usize) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); n_classes];
        for (id, a) in self.iter() {
            if a.class_id < n_classes {
                out[a.class_id].push(id);
            }
        }
        out
    }

    pub fn class_counts(&self, n_classes: usize) -> Vec<usize> {
        self.ids_by_class(n_classes).iter().map(Vec::len).collect()
    }

    /// JSON Lines `{"id", "class_id", "score"}`, sorted by id.
    pub fn to_jsonl(&self) -> String {
        #[derive(Serialize)]
        struct Rec<'a> {
            id: &'a str,
            class_id: usize,
            score: f64,
        }
        let mut s = String::new();
        for (id, a) in self.iter() {
            s.push_str(&serde_json::to_string(&Rec { id, class_id: a.class_id, score: a.score }).expect("serializes"));
            s.push('\n');
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RetrievalError> {
        let path = path.as_ref();
        let io = |source| RetrievalError::Io { path: path.to_path_buf(), source };
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        out.write_all(self.to_jsonl().as_bytes()).map_err(io)?;
        out.flush().map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RetrievalError> {
        #[derive(Deserialize)]
        struct Rec {
            id: String,
            class_id: usize,
            score: f64,
        }
        let path = path.as_ref();
        let io = |source| RetrievalError::Io { path: path.to_path_buf(), source };
        let mut set = PseudoLabelSet::default();
        for (i, line) in BufReader::new(File::open(path).map_err(io)?).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Rec = serde_json::from_str(&line)
                .map_err(|e| RetrievalError::Malformed { line: i + 1, reason: e.to_string() })?;
            if set.assignments.contains_key(&rec.id) {
                return Err(RetrievalError::Malformed { line: i + 1, reason: format!("duplicate id {:?}", rec.id) });
            }
            set.insert(rec.id, rec.class_id, rec.score);
        }
        Ok(set)
    }
}

/// Union of all classes' hits. A document retrieved by several classes goes
/// to the class that scored it highest; equal scores go to the lower class id.
pub fn dedup_assign(results: &[RetrievalResult]) -> PseudoLabelSet {
    let mut set = PseudoLabelSet::default();
    for result in results {
        for hit in &result.hits {
            let candidate = Assignment { class_id: result.class_id, score: hit.score };
            set.assignments
                .entry(hit.id.clone())
                .and_modify(|cur| {
                    let better = candidate.score > cur.score
                        || (candidate.score == cur.score && candidate.class_id < cur.class_id);
                    if better {
                        *cur = candidate;
                    }
                })
                .or_insert(candidate);
        }
    }
    set
}
