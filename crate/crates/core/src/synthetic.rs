//! Synthetic labeled corpus with matching embedding tables.
//!
//! Each class is a Gaussian cluster in the retrieval space centred on a
//! scaled basis vector and owns a set of signature words. The first
//! signature word is the label name. Its retrieval-space vector leans
//! partly toward the next class's centroid and it occurs in only a small
//! share of the class's documents, so the bare label name retrieves a
//! noticeably noisy set; the remaining signature words sit on the class
//! centroid. Semantic-space vectors cluster signature words per class on
//! axes disjoint from the retrieval centroids.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{save_corpus, save_label_specs, CorpusError, Document, LabelSpec};
use crate::store::{write_store, EmbeddingStore, StoreError, VectorTable};

const PREFIXES: [&str; 8] = ["cardio", "neuro", "hepato", "osteo", "dermo", "gastro", "nephro", "pneumo"];
const SUFFIXES: [&str; 12] =
    ["pathy", "genic", "logic", "plasty", "scopy", "tomy", "cyte", "gram", "lysis", "trophy", "philic", "stasis"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub docs_per_class: usize,
    pub dim: usize,
    pub signature_words: usize,
    pub filler_words: usize,
    /// Within-cluster standard deviation per coordinate.
    pub cluster_std: f64,
    /// Distance between any two centroids, in units of `cluster_std`.
    pub separation: f64,
    /// Weight of the neighbouring class's centroid in the label word vector.
    pub label_leak: f64,
    /// Probability that a document mentions its own label name.
    pub label_mention_rate: f64,
    pub signature_per_doc: usize,
    pub crosstalk_per_doc: usize,
    pub filler_per_doc: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_classes: 4,
            docs_per_class: 250,
            dim: 32,
            signature_words: 10,
            filler_words: 200,
            cluster_std: 1.0,
            separation: 6.0,
            label_leak: 0.35,
            label_mention_rate: 0.15,
            signature_per_doc: 8,
            crosstalk_per_doc: 2,
            filler_per_doc: 20,
            seed: 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error("cannot create {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub documents: Vec<Document>,
    pub specs: Vec<LabelSpec>,
    pub store: EmbeddingStore,
    pub centroids: Vec<Vec<f64>>,
    pub signatures: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub corpus: PathBuf,
    pub labels: PathBuf,
    pub doc_vectors: PathBuf,
    pub word_vectors: PathBuf,
    pub sem_vectors: PathBuf,
}

pub fn signature_word(class: usize, j: usize) -> String {
    if class < PREFIXES.len() && j < SUFFIXES.len() {
        format!("{}{}", PREFIXES[class], SUFFIXES[j])
    } else {
        format!("class{class}word{j}")
    }
}

fn filler_word(i: usize) -> String {
    format!("term{i:03}")
}

impl SyntheticConfig {
    pub fn generate(&self) -> SyntheticDataset {
        assert!(self.n_classes >= 2, "need at least two classes");
        assert!(2 * self.n_classes <= self.dim, "dim must hold retrieval and semantic axes");
        assert!(self.signature_words >= 2, "need a label word plus at least one signature word");

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let c = self.n_classes;
        let noise = Normal::new(0.0, self.cluster_std).expect("positive std");
        let radius = self.separation * self.cluster_std / std::f64::consts::SQRT_2;

        let axis = |i: usize, scale: f64| -> Vec<f64> {
            let mut v = vec![0.0; self.dim];
            v[i] = scale;
            v
        };
        let centroids: Vec<Vec<f64>> = (0..c).map(|k| axis(k, radius)).collect();
        let sem_centres: Vec<Vec<f64>> = (0..c).map(|k| axis(c + k, 3.0)).collect();
        let signatures: Vec<Vec<String>> =
            (0..c).map(|k| (0..self.signature_words).map(|j| signature_word(k, j)).collect()).collect();
        let fillers: Vec<String> = (0..self.filler_words).map(filler_word).collect();

        let perturb = |base: &[f64], std: f64, rng: &mut ChaCha8Rng| -> Vec<f32> {
            let n = Normal::new(0.0, std).expect("positive std");
            base.iter().map(|&b| (b + n.sample(rng)) as f32).collect()
        };

        let mut doc_words = VectorTable::new(self.dim);
        let mut sem_words = VectorTable::new(self.dim);
        for k in 0..c {
            let next = (k + 1) % c;
            for (j, w) in signatures[k].iter().enumerate() {
                let base: Vec<f64> = if j == 0 {
                    (0..self.dim)
                        .map(|i| (1.0 - self.label_leak) * centroids[k][i] + self.label_leak * centroids[next][i])
                        .collect()
                } else {
                    centroids[k].clone()
                };
                doc_words.push(w.clone(), &perturb(&base, 0.3, &mut rng)).expect("fresh key");
                sem_words.push(w.clone(), &perturb(&sem_centres[k], 0.6, &mut rng)).expect("fresh key");
            }
        }
        let zero = vec![0.0; self.dim];
        for w in &fillers {
            doc_words.push(w.clone(), &perturb(&zero, 0.5, &mut rng)).expect("fresh key");
            sem_words.push(w.clone(), &perturb(&zero, 1.0, &mut rng)).expect("fresh key");
        }

        let mut docs_table = VectorTable::new(self.dim);
        let mut documents = Vec::with_capacity(c * self.docs_per_class);
        for i in 0..self.docs_per_class {
            for k in 0..c {
                let id = format!("doc{:05}", i * c + k);
                let v: Vec<f32> = centroids[k].iter().map(|&m| (m + noise.sample(&mut rng)) as f32).collect();
                docs_table.push(id.clone(), &v).expect("fresh key");

                let mut words: Vec<&str> = Vec::new();
                if rng.random_bool(self.label_mention_rate) {
                    words.push(&signatures[k][0]);
                }
                for _ in 0..self.signature_per_doc {
                    words.push(&signatures[k][rng.random_range(1..self.signature_words)]);
                }
                for _ in 0..self.crosstalk_per_doc {
                    let other = (k + rng.random_range(1..c)) % c;
                    words.push(&signatures[other][rng.random_range(1..self.signature_words)]);
                }
                for _ in 0..self.filler_per_doc {
                    words.push(&fillers[rng.random_range(0..fillers.len())]);
                }
                words.shuffle(&mut rng);
                documents.push(Document { id, text: words.join(" "), gold_label: Some(k) });
            }
        }

        let specs = (0..c).map(|k| LabelSpec::new(k, signatures[k][0].clone())).collect();
        let store = EmbeddingStore::new(docs_table, doc_words, sem_words).expect("all tables share dim");
        SyntheticDataset { documents, specs, store, centroids, signatures }
    }
}

impl SyntheticDataset {
    /// Writes corpus, label spec and the three vector files into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<DatasetPaths, WriteError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| WriteError::Io { path: dir.to_path_buf(), source })?;
        let paths = DatasetPaths {
            corpus: dir.join("corpus.jsonl"),
            labels: dir.join("labels.jsonl"),
            doc_vectors: dir.join("docs.wndr"),
            word_vectors: dir.join("words.wndr"),
            sem_vectors: dir.join("sem.wndr"),
        };
        save_corpus(&paths.corpus, &self.documents)?;
        save_label_specs(&paths.labels, &self.specs)?;
        write_store(&self.store, &paths.doc_vectors, &paths.word_vectors, &paths.sem_vectors)?;
        Ok(paths)
    }
}
