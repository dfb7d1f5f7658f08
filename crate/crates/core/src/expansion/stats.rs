use std::collections::{HashMap, HashSet};

use crate::corpus::Corpus;
use crate::retrieval::PseudoLabelSet;

use super::ExpansionError;

/// Token counts over the documents pseudo-labeled with one class.
///
/// `tf` counts every occurrence; `cnt` counts containing documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassTermStats {
    pub class_id: usize,
    pub tf: HashMap<String, u64>,
    pub cnt: HashMap<String, u64>,
    pub total_tokens: u64,
    pub n_docs: u64,
}

impl ClassTermStats {
    pub fn from_documents<'a, I, D>(class_id: usize, docs: I) -> Self
    where
        I: IntoIterator<Item = &'a D>,
        D: AsRef<[String]> + ?Sized + 'a,
    {
        let mut stats = ClassTermStats { class_id, ..Default::default() };
        for doc in docs {
            let tokens = doc.as_ref();
            stats.n_docs += 1;
            stats.total_tokens += tokens.len() as u64;
            let mut seen = HashSet::new();
            for t in tokens {
                *stats.tf.entry(t.clone()).or_default() += 1;
                if seen.insert(t.as_str()) {
                    *stats.cnt.entry(t.clone()).or_default() += 1;
                }
            }
        }
        stats
    }
}

/// Per-class statistics over the local corpus (the union of retrieved
/// documents), plus the corpus-wide counts and average class size that the
/// local score discounts by.
#[derive(Debug, Clone)]
pub struct TermStatistics {
    pub per_class: Vec<ClassTermStats>,
    pub global_tf: HashMap<String, u64>,
    /// Mean number of tokens per class, over all `C` classes.
    pub avg_tokens: f64,
}

impl TermStatistics {
    pub fn from_class_stats(per_class: Vec<ClassTermStats>) -> Self {
        let mut global_tf: HashMap<String, u64> = HashMap::new();
        for stats in &per_class {
            for (t, &n) in &stats.tf {
                *global_tf.entry(t.clone()).or_default() += n;
            }
        }
        let total: u64 = per_class.iter().map(|s| s.total_tokens).sum();
        let avg_tokens = if per_class.is_empty() { 0.0 } else { total as f64 / per_class.len() as f64 };
        TermStatistics { per_class, global_tf, avg_tokens }
    }

    pub fn from_pseudo_labels(
        labels: &PseudoLabelSet,
        corpus: &Corpus,
        n_classes: usize,
    ) -> Result<Self, ExpansionError> {
        let grouped = labels.ids_by_class(n_classes);
        let mut per_class = Vec::with_capacity(n_classes);
        for (class_id, ids) in grouped.iter().enumerate() {
            let docs = ids
                .iter()
                .map(|id| corpus.tokens_of(id).ok_or_else(|| ExpansionError::UnknownDocument((*id).to_owned())))
                .collect::<Result<Vec<_>, _>>()?;
            per_class.push(ClassTermStats::from_documents(class_id, docs));
        }
        Ok(Self::from_class_stats(per_class))
    }
}
