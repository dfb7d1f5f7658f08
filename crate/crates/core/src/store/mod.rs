//! Embedding tables for the retrieval space and the semantic space.
//!
//! The retrieval space holds document vectors and per-word vectors used to
//! compose queries; relevance there is a raw dot product. The semantic space
//! holds word vectors compared by cosine during keyword scoring. The two are
//! never mixed.

mod encoder;
mod wndr;

use std::path::{Path, PathBuf};

use crate::corpus::Corpus;
use crate::scalar::VectorError;

pub use encoder::{mean_word_vector, ExternalEmbedder, MeanWordEncoder, QueryEncoder};
pub use wndr::{read_table, write_table, VectorTable, MAGIC};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt vector file: {0}")]
    CorruptHeader(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no document vector for {0:?}")]
    MissingDocVector(String),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("non-finite component in vector {0:?}")]
    NonFinite(String),
    #[error("no token of {0:?} has a word vector")]
    NoKnownTokens(String),
    #[error("external embedder failed: {0}")]
    EmbedderFailure(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        StoreError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    docs: VectorTable,
    doc_words: VectorTable,
    sem_words: VectorTable,
}

impl EmbeddingStore {
    pub fn new(docs: VectorTable, doc_words: VectorTable, sem_words: VectorTable) -> Result<Self, StoreError> {
        let dim = docs.dim();
        for other in [&doc_words, &sem_words] {
            if other.dim() != dim {
                return Err(StoreError::DimensionMismatch { expected: dim, got: other.dim() });
            }
        }
        Ok(EmbeddingStore { dim, docs, doc_words, sem_words })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn docs(&self) -> &VectorTable {
        &self.docs
    }

    pub fn doc_words(&self) -> &VectorTable {
        &self.doc_words
    }

    pub fn sem_words(&self) -> &VectorTable {
        &self.sem_words
    }

    pub fn doc_vector(&self, id: &str) -> Result<&[f32], StoreError> {
        self.docs.get(id).ok_or_else(|| StoreError::MissingDocVector(id.to_owned()))
    }

    /// Checks that every corpus document has a vector.
    pub fn bind(&self, corpus: &Corpus) -> Result<(), StoreError> {
        corpus.ids().try_for_each(|id| self.doc_vector(id).map(drop))
    }

    /// Copy of this store whose document table holds exactly the corpus
    /// documents, in corpus order.
    pub fn restricted_to(&self, corpus: &Corpus) -> Result<Self, StoreError> {
        let mut docs = VectorTable::new(self.dim);
        for id in corpus.ids() {
            docs.push(id, self.doc_vector(id)?)?;
        }
        Ok(EmbeddingStore { dim: self.dim, docs, doc_words: self.doc_words.clone(), sem_words: self.sem_words.clone() })
    }

    /// Retrieval-space query vector: mean of the query's word vectors.
    pub fn embed_query(&self, query: &str) -> Result<Vec<f64>, StoreError> {
        mean_word_vector(&self.doc_words, query)
    }

    /// Semantic-space vector for a word or phrase.
    pub fn semantic_vector(&self, text: &str) -> Result<Vec<f64>, StoreError> {
        mean_word_vector(&self.sem_words, text)
    }
}

pub fn load_store(
    doc_path: impl AsRef<Path>,
    word_path: impl AsRef<Path>,
    sem_path: impl AsRef<Path>,
) -> Result<EmbeddingStore, StoreError> {
    let docs = read_table(doc_path)?;
    let words = read_table(word_path)?;
    let sem = read_table(sem_path)?;
    EmbeddingStore::new(docs, words, sem)
}

pub fn write_store(
    store: &EmbeddingStore,
    doc_path: impl AsRef<Path>,
    word_path: impl AsRef<Path>,
    sem_path: impl AsRef<Path>,
) -> Result<(), StoreError> {
    write_table(doc_path, &store.docs)?;
    write_table(word_path, &store.doc_words)?;
    write_table(sem_path, &store.sem_words)
}
