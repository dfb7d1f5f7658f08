//! Classification metrics and label-name hard-match diagnostics.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{contains_run, Corpus, LabelSpec};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("prediction and gold id sets differ (e.g. {0:?})")]
    IdSetMismatch(String),
    #[error("class {class_id} out of range for {n_classes} classes")]
    ClassOutOfRange { class_id: usize, n_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// `confusion[gold][pred]`.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn accuracy(&self) -> f64 {
        let total: u64 = self.confusion.iter().flatten().sum();
        let correct: u64 = (0..self.confusion.len()).map(|c| self.confusion[c][c]).sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "micro-F1  {:.4}", self.micro_f1);
        let _ = writeln!(s, "macro-F1  {:.4}", self.macro_f1);
        let _ = writeln!(s, "{:>6}  {:>8}  {:>8}", "class", "f1", "support");
        for (c, f1) in self.per_class_f1.iter().enumerate() {
            let support: u64 = self.confusion[c].iter().sum();
            let _ = writeln!(s, "{c:>6}  {f1:>8.4}  {support:>8}");
        }
        s
    }
}

/// Micro and macro F1 over `n_classes` classes. Classes absent from both
/// predictions and gold count as F1 = 0 in the macro average.
pub fn f1_report(
    pred: &HashMap<String, usize>,
    gold: &HashMap<String, usize>,
    n_classes: usize,
) -> Result<MetricsReport, EvalError> {
    if pred.len() != gold.len() {
        let stray = pred
            .keys()
            .find(|k| !gold.contains_key(*k))
            .or_else(|| gold.keys().find(|k| !pred.contains_key(*k)))
            .cloned()
            .unwrap_or_default();
        return Err(EvalError::IdSetMismatch(stray));
    }
    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for (id, &g) in gold {
        let &p = pred.get(id).ok_or_else(|| EvalError::IdSetMismatch(id.clone()))?;
        for class_id in [g, p] {
            if class_id >= n_classes {
                return Err(EvalError::ClassOutOfRange { class_id, n_classes });
            }
        }
        confusion[g][p] += 1;
    }

    let mut per_class_f1 = Vec::with_capacity(n_classes);
    let mut tp_total = 0u64;
    let mut n = 0u64;
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let gold_c: u64 = confusion[c].iter().sum();
        let pred_c: u64 = confusion.iter().map(|row| row[c]).sum();
        let denom = gold_c + pred_c;
        per_class_f1.push(if denom == 0 { 0.0 } else { (2 * tp) as f64 / denom as f64 });
        tp_total += tp;
        n += gold_c;
    }
    // pooled FP and FN both equal n - tp for single-label data
    let micro_f1 = if n == 0 { 0.0 } else { tp_total as f64 / n as f64 };
    let macro_f1 = if n_classes == 0 { 0.0 } else { per_class_f1.iter().sum::<f64>() / n_classes as f64 };
    Ok(MetricsReport { micro_f1, macro_f1, per_class_f1, confusion })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotReport {
    pub precision: f64,
    pub coverage: f64,
    pub per_class_coverage: Vec<f64>,
    /// False when no document matched exactly one class; precision is then
    /// reported as 0.
    pub precision_defined: bool,
}

impl PilotReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let flag = if self.precision_defined { "" } else { " (undefined)" };
        let _ = writeln!(s, "precision {:.4}{flag}", self.precision);
        let _ = writeln!(s, "coverage  {:.4}", self.coverage);
        let _ = writeln!(s, "{:>6}  {:>8}", "class", "coverage");
        for (c, v) in self.per_class_coverage.iter().enumerate() {
            let _ = writeln!(s, "{c:>6}  {v:>8.4}");
        }
        s
    }
}

/// How well the bare label names match documents literally.
///
/// A document matches class `c` when the tokenized label name occurs as a
/// contiguous run of its tokens. Coverage counts documents matched by any
/// class; precision is taken over documents matched by exactly one class.
pub fn hard_match_pilot(corpus: &Corpus, specs: &[LabelSpec], gold: &HashMap<String, usize>) -> PilotReport {
    let n_classes = specs.len();
    let names: Vec<Vec<String>> = specs.iter().map(LabelSpec::name_tokens).collect();
    let mut covered = 0usize;
    let (mut single, mut single_correct) = (0usize, 0usize);
    let mut class_docs = vec![0usize; n_classes];
    let mut class_hits = vec![0usize; n_classes];
    let mut evaluated = 0usize;

    for doc in corpus.tokenized() {
        let Some(&g) = gold.get(&doc.id) else { continue };
        evaluated += 1;
        let matched: Vec<usize> = (0..n_classes).filter(|&c| contains_run(&doc.tokens, &names[c])).collect();
        if g < n_classes {
            class_docs[g] += 1;
            if matched.contains(&g) {
                class_hits[g] += 1;
            }
        }
        if !matched.is_empty() {
            covered += 1;
        }
        if let [only] = matched[..] {
            single += 1;
            if only == g {
                single_correct += 1;
            }
        }
    }

    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    PilotReport {
        precision: frac(single_correct, single),
        coverage: frac(covered, evaluated),
        per_class_coverage: (0..n_classes).map(|c| frac(class_hits[c], class_docs[c])).collect(),
        precision_defined: single > 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn maps(gold: &[usize], pred: &[usize]) -> (HashMap<String, usize>, HashMap<String, usize>) {
        let g = gold.iter().enumerate().map(|(i, &c)| (format!("d{i}"), c)).collect();
        let p = pred.iter().enumerate().map(|(i, &c)| (format!("d{i}"), c)).collect();
        (p, g)
    }

    #[test]
    fn perfect_agreement() {
        let labels = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0];
        let (p, g) = maps(&labels, &labels);
        let r = f1_report(&p, &g, 3).unwrap();
        assert_eq!(r.micro_f1, 1.0);
        assert_eq!(r.macro_f1, 1.0);
    }

    #[test]
    fn two_class_worked_example() {
        let (p, g) = maps(&[0, 0, 1, 1], &[0, 1, 1, 1]);
        let r = f1_report(&p, &g, 2).unwrap();
        assert_eq!(r.micro_f1, 0.75);
        assert!((r.per_class_f1[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class_f1[1] - 0.8).abs() < 1e-15);
        assert!((r.macro_f1 - 0.733_333_333_333_333_3).abs() < 1e-12);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn constant_predictor() {
        let gold: Vec<usize> = (0..8).map(|i| i % 4).collect();
        let (p, g) = maps(&gold, &[0; 8]);
        let r = f1_report(&p, &g, 4).unwrap();
        assert_eq!(r.micro_f1, 0.25);
        // class 0: tp 2, gold 2, pred 8 → 4/10
        assert!((r.per_class_f1[0] - 0.4).abs() < 1e-15);
        assert!((r.macro_f1 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let (p, g) = maps(&[0, 1], &[0, 1]);
        let r = f1_report(&p, &g, 3).unwrap();
        assert_eq!(r.per_class_f1, vec![1.0, 1.0, 0.0]);
        assert!((r.macro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mismatched_ids() {
        let (p, mut g) = maps(&[0, 1], &[0, 1]);
        g.insert("extra".into(), 0);
        assert!(matches!(f1_report(&p, &g, 2), Err(EvalError::IdSetMismatch(_))));
        let (mut p, g) = maps(&[0, 1], &[0, 1]);
        p.remove("d0");
        p.insert("other".into(), 1);
        assert!(matches!(f1_report(&p, &g, 2), Err(EvalError::IdSetMismatch(_))));
        let (p, g) = maps(&[0, 5], &[0, 1]);
        assert!(matches!(f1_report(&p, &g, 2), Err(EvalError::ClassOutOfRange { class_id: 5, .. })));
    }

    fn corpus(texts: &[(&str, usize)]) -> (Corpus, HashMap<String, usize>) {
        let docs: Vec<Document> = texts
            .iter()
            .enumerate()
            .map(|(i, (t, g))| Document { id: format!("d{i}"), text: (*t).into(), gold_label: Some(*g) })
            .collect();
        let c = Corpus::new(docs).unwrap();
        let gold = c.gold();
        (c, gold)
    }

    #[test]
    fn direct_containment() {
        let (c, gold) = corpus(&[("a graph problem", 0)]);
        let specs = vec![LabelSpec::new(0, "graph"), LabelSpec::new(1, "algebra")];
        let r = hard_match_pilot(&c, &specs, &gold);
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.precision, 1.0);
        assert!(r.precision_defined);
        assert_eq!(r.per_class_coverage, vec![1.0, 0.0]);
    }

    #[test]
    fn nothing_matches() {
        let (c, gold) = corpus(&[("unrelated text", 0), ("more words", 1)]);
        let specs = vec![LabelSpec::new(0, "graph"), LabelSpec::new(1, "algebra")];
        let r = hard_match_pilot(&c, &specs, &gold);
        assert_eq!(r.coverage, 0.0);
        assert_eq!(r.precision, 0.0);
        assert!(!r.precision_defined);
    }

    #[test]
    fn multi_match_counts_for_coverage_only() {
        let (c, gold) = corpus(&[("graph algebra", 0), ("graph theory", 1), ("algebra", 1)]);
        let specs = vec![LabelSpec::new(0, "graph"), LabelSpec::new(1, "algebra")];
        let r = hard_match_pilot(&c, &specs, &gold);
        assert_eq!(r.coverage, 1.0);
        assert_eq!(r.precision, 0.5);
        assert_eq!(r.per_class_coverage, vec![1.0, 0.5]);
    }

    #[test]
    fn eleven_classes_four_unmatched() {
        let names = [
            "Cardiovascular diseases",
            "Chronic kidney disease",
            "HIV/AIDS",
            "Diabetes (mellitus)",
            "Chronic respiratory diseases",
            "Digestive diseases",
            "Hepatitis A/B/C/E",
            "Mental disorders",
            "Musculoskeletal disorders",
            "Neoplasms (cancer)",
            "Neurological disorders",
        ];
        let never = [4usize, 5, 6, 9];
        let mut texts = Vec::new();
        for (c, name) in names.iter().enumerate() {
            let text = if never.contains(&c) { "patients studied".to_string() } else { format!("study of {name} outcomes") };
            texts.push((text, c));
        }
        let refs: Vec<(&str, usize)> = texts.iter().map(|(t, c)| (t.as_str(), *c)).collect();
        let (corp, gold) = corpus(&refs);
        let specs: Vec<LabelSpec> = names.iter().enumerate().map(|(c, n)| LabelSpec::new(c, *n)).collect();
        let r = hard_match_pilot(&corp, &specs, &gold);
        let zero: Vec<usize> = (0..11).filter(|&c| r.per_class_coverage[c] == 0.0).collect();
        assert_eq!(zero, never);
        assert!((r.coverage - 7.0 / 11.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn micro_equals_accuracy(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60)) {
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let (p, g) = maps(&gold, &pred);
            let r = f1_report(&p, &g, 4).unwrap();
            let acc = gold.iter().zip(&pred).filter(|(a, b)| a == b).count() as f64 / gold.len() as f64;
            prop_assert_eq!(r.micro_f1, acc);
            prop_assert_eq!(r.accuracy(), acc);
            for f in r.per_class_f1.iter().chain([&r.micro_f1, &r.macro_f1]) {
                prop_assert!((0.0..=1.0).contains(f));
            }
            for c in 0..4 {
                let support = gold.iter().filter(|&&x| x == c).count() as u64;
                prop_assert_eq!(r.confusion[c].iter().sum::<u64>(), support);
            }
        }

        #[test]
        fn relabeling_permutes_report(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..40), shift in 1usize..3) {
            let perm = |c: usize| (c + shift) % 3;
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let (p, g) = maps(&gold, &pred);
            let base = f1_report(&p, &g, 3).unwrap();
            let (p2, g2) = maps(&gold.iter().map(|&c| perm(c)).collect::<Vec<_>>(), &pred.iter().map(|&c| perm(c)).collect::<Vec<_>>());
            let moved = f1_report(&p2, &g2, 3).unwrap();
            prop_assert_eq!(base.micro_f1, moved.micro_f1);
            prop_assert!((base.macro_f1 - moved.macro_f1).abs() < 1e-15);
            for c in 0..3 {
                prop_assert_eq!(base.per_class_f1[c], moved.per_class_f1[perm(c)]);
            }
        }

        #[test]
        fn shortening_name_never_lowers_coverage(words in prop::collection::vec(0usize..5, 1..12), start in 0usize..3, len in 1usize..3) {
            let vocab = ["alpha", "beta", "gamma", "delta", "omega"];
            let text: Vec<&str> = words.iter().map(|&w| vocab[w]).collect();
            let (c, gold) = corpus(&[(&text.join(" "), 0)]);
            let full = "beta gamma delta";
            let full_tokens: Vec<&str> = full.split(' ').collect();
            let s = start.min(2);
            let e = (s + len).min(3);
            let short = full_tokens[s..e].join(" ");
            let r_full = hard_match_pilot(&c, &[LabelSpec::new(0, full)], &gold);
            let r_short = hard_match_pilot(&c, &[LabelSpec::new(0, short)], &gold);
            prop_assert!(r_short.coverage >= r_full.coverage);
        }
    }
}
