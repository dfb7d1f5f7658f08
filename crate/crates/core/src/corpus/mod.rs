//! Unlabeled corpus and label-name ingestion.

mod labels;
mod tokenize;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use labels::{load_label_specs, save_label_specs, LabelSpec};
pub use tokenize::{contains_run, is_stopword, tokenize, MIN_TOKEN_CHARS};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("document {0:?} has empty text")]
    EmptyText(String),
    #[error("document {id:?} has gold label {label} but there are only {n_classes} classes")]
    GoldOutOfRange { id: String, label: usize, n_classes: usize },
    #[error("label spec: {0}")]
    Labels(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// One corpus record. `gold_label` is carried for evaluation only and is
/// never read by retrieval, expansion or training.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDocument {
    pub id: String,
    pub tokens: Vec<String>,
}

/// A validated, tokenized corpus. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    tokenized: Vec<TokenizedDocument>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.text.trim().is_empty() {
                return Err(CorpusError::EmptyText(doc.id.clone()));
            }
            if index.insert(doc.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        let tokenized = documents
            .iter()
            .map(|d| TokenizedDocument { id: d.id.clone(), tokens: tokenize(&d.text) })
            .collect();
        Ok(Corpus { documents, tokenized, index })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn tokenized(&self) -> &[TokenizedDocument] {
        &self.tokenized
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn tokens_of(&self, id: &str) -> Option<&[String]> {
        self.position(id).map(|i| self.tokenized[i].tokens.as_slice())
    }

    pub fn has_gold(&self) -> bool {
        !self.documents.is_empty() && self.documents.iter().all(|d| d.gold_label.is_some())
    }

    /// Gold labels keyed by id, for documents that carry one.
    pub fn gold(&self) -> HashMap<String, usize> {
        self.documents
            .iter()
            .filter_map(|d| d.gold_label.map(|g| (d.id.clone(), g)))
            .collect()
    }

    pub fn check_gold_range(&self, n_classes: usize) -> Result<(), CorpusError> {
        for d in &self.documents {
            if let Some(label) = d.gold_label {
                if label >= n_classes {
                    return Err(CorpusError::GoldOutOfRange { id: d.id.clone(), label, n_classes });
                }
            }
        }
        Ok(())
    }
}

/// Reads a JSON Lines corpus (`{"id", "text", "label"?}` per line). Blank
/// lines are skipped; line numbers in errors are 1-based.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let mut docs = Vec::new();
    let mut seen = HashMap::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| CorpusError::MalformedRecord { line: line_no, reason: e.to_string() })?;
        if doc.text.trim().is_empty() {
            return Err(CorpusError::EmptyText(doc.id));
        }
        if seen.insert(doc.id.clone(), line_no).is_some() {
            return Err(CorpusError::DuplicateId(doc.id));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_corpus(path: impl AsRef<Path>, docs: &[Document]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("documents always serialize");
        writeln!(out, "{line}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> PathBuf {
        let p = dir.path().join("corpus.jsonl");
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "{\"id\":\"a\",\"text\":\"first doc\"}\n{\"id\":\"b\",\"text\":\"second\",\"label\":1}\n");
        let docs = load_corpus(&p).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].id, "a");
        assert_eq!(docs[1].id, "b");
        assert_eq!(docs[0].gold_label, None);
        assert_eq!(docs[1].gold_label, Some(1));
    }

    #[test]
    fn rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "{\"id\":\"a\",\"text\":\"x y\"}\n{\"id\":\"a\",\"text\":\"z w\"}\n");
        assert!(matches!(load_corpus(&p), Err(CorpusError::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn rejects_empty_text_and_bad_json() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "{\"id\":\"a\",\"text\":\"   \"}\n");
        assert!(matches!(load_corpus(&p), Err(CorpusError::EmptyText(id)) if id == "a"));
        let p = write(&dir, "{\"id\":\"a\",\"text\":\"ok\"}\n{\"id\":\"b\"}\n");
        assert!(matches!(load_corpus(&p), Err(CorpusError::MalformedRecord { line: 2, .. })));
        let p = write(&dir, "not json\n");
        assert!(matches!(load_corpus(&p), Err(CorpusError::MalformedRecord { line: 1, .. })));
    }

    #[test]
    fn long_abstract_survives() {
        let text = (0..254).map(|i| format!("term{i}")).collect::<Vec<_>>().join(" ");
        let dir = tempfile::tempdir().unwrap();
        let rec = serde_json::json!({"id": "mesh-1", "text": text});
        let p = write(&dir, &format!("{rec}\n"));
        let docs = load_corpus(&p).unwrap();
        assert_eq!(docs[0].text, text);
        let corpus = Corpus::new(docs).unwrap();
        assert_eq!(corpus.tokens_of("mesh-1").unwrap().len(), 254);
    }

    #[test]
    fn corpus_checks_gold_range() {
        let docs = vec![Document { id: "a".into(), text: "hello world".into(), gold_label: Some(3) }];
        let corpus = Corpus::new(docs).unwrap();
        assert!(corpus.has_gold());
        assert!(corpus.check_gold_range(4).is_ok());
        assert!(matches!(corpus.check_gold_range(3), Err(CorpusError::GoldOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn save_then_load_round_trips(texts in prop::collection::vec("[^\\s][\\PC]{0,40}", 1..12)) {
            let docs: Vec<Document> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document { id: format!("d{i}"), text: t.clone(), gold_label: (i % 2 == 0).then_some(i % 3) })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.jsonl");
            save_corpus(&p, &docs).unwrap();
            prop_assert_eq!(load_corpus(&p).unwrap(), docs);
        }
    }
}
