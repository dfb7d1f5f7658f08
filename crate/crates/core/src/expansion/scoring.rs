//! Keyword scoring for one class: a class-based TF-IDF score over the local
//! corpus, an embedding-similarity score against the label name, and
//! reciprocal rank fusion of the two rankings.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::LabelSpec;
use crate::scalar::{cosine, Scalar};
use crate::store::{mean_word_vector, StoreError, VectorTable};

use super::{ClassTermStats, ExpansionError};

/// Indicativeness of each class token:
/// `tf(w,c)^alpha * ln(1 + avg_tokens / tf(w)) * cnt(w,c)`.
///
/// `global_tf` holds counts over the whole local corpus and must dominate
/// the class counts.
pub fn local_score<S: Scalar>(
    stats: &ClassTermStats,
    global_tf: &HashMap<String, u64>,
    avg_tokens: S,
    alpha: S,
) -> Result<HashMap<String, S>, ExpansionError> {
    if avg_tokens.is_nan() || avg_tokens <= S::zero() || alpha.is_nan() || alpha <= S::zero() {
        return Err(ExpansionError::InvalidParameter(format!(
            "avg_tokens ({avg_tokens}) and alpha ({alpha}) must be positive"
        )));
    }
    let mut out = HashMap::with_capacity(stats.tf.len());
    for (token, &tf) in &stats.tf {
        if tf == 0 {
            continue;
        }
        let corpus_tf = global_tf.get(token).copied().unwrap_or(0);
        if corpus_tf < tf {
            return Err(ExpansionError::InconsistentCounts(token.clone()));
        }
        let cnt = stats.cnt.get(token).copied().unwrap_or(0);
        let idf = (S::one() + avg_tokens / S::of(corpus_tf as f64)).ln();
        out.insert(token.clone(), S::of(tf as f64).powf(alpha) * idf * S::of(cnt as f64));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalScores {
    pub scores: HashMap<String, f64>,
    /// Candidates without a semantic vector (or with a zero vector).
    pub dropped: usize,
}

/// Cosine between each candidate's semantic vector and the label name's.
pub fn global_score(
    sem_words: &VectorTable,
    candidates: &[String],
    label_name: &str,
) -> Result<GlobalScores, StoreError> {
    let label = mean_word_vector(sem_words, label_name)?;
    let mut scores = HashMap::with_capacity(candidates.len());
    let mut dropped = 0;
    for token in candidates {
        let Some(v) = sem_words.get(token) else {
            dropped += 1;
            continue;
        };
        let v: Vec<f64> = v.iter().map(|&x| x as f64).collect();
        match cosine(&v, &label) {
            Ok(c) => {
                scores.insert(token.clone(), c);
            }
            Err(_) => dropped += 1,
        }
    }
    Ok(GlobalScores { scores, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordCandidate<S> {
    pub token: String,
    pub local_score: S,
    pub global_score: S,
    pub rank_local: usize,
    pub rank_global: usize,
    pub fused: S,
}

impl<S: Scalar> KeywordCandidate<S> {
    /// Exact comparison of `1/a + 1/b` values as rationals `(a+b)/(a*b)`.
    fn cmp_fused(&self, other: &Self) -> Ordering {
        let (a, b) = (self.rank_local as u128, self.rank_global as u128);
        let (c, d) = (other.rank_local as u128, other.rank_global as u128);
        ((a + b) * c * d).cmp(&((c + d) * a * b))
    }
}

fn by_score_then_token<S: Scalar>(a: (&str, S), b: (&str, S)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0))
}

/// Top `m` tokens by local score, descending, ties lexicographic.
pub fn local_pool<S: Scalar>(local: &HashMap<String, S>, m: usize) -> Vec<String> {
    let mut ranked: Vec<(&str, S)> = local.iter().map(|(t, &s)| (t.as_str(), s)).collect();
    ranked.sort_by(|&a, &b| by_score_then_token(a, b));
    ranked.into_iter().take(m).map(|(t, _)| t.to_owned()).collect()
}

/// Candidate pool for `spec`: top-`m` by local score, minus tokens already
/// in the current query.
pub fn candidate_pool<S: Scalar>(local: &HashMap<String, S>, spec: &LabelSpec, m: usize) -> Vec<String> {
    let query = spec.query_tokens();
    local_pool(local, m).into_iter().filter(|t| !query.contains(t)).collect()
}

/// Ranks the pool under both scores and fuses the ranks. The returned list
/// is in selection order: fused score descending, then higher local score,
/// then token. Pool tokens without a global score are left out.
pub fn rank_candidates<S: Scalar>(
    local: &HashMap<String, S>,
    global: &HashMap<String, S>,
    spec: &LabelSpec,
    m: usize,
) -> Result<Vec<KeywordCandidate<S>>, ExpansionError> {
    let pool: Vec<(String, S, S)> = candidate_pool(local, spec, m)
        .into_iter()
        .filter_map(|t| {
            let g = *global.get(&t)?;
            let l = local[&t];
            Some((t, l, g))
        })
        .collect();
    if pool.is_empty() {
        return Err(ExpansionError::EmptyCandidatePool(spec.class_id));
    }

    let rank_of = |key: fn(&(String, S, S)) -> S| -> HashMap<&str, usize> {
        let mut order: Vec<&(String, S, S)> = pool.iter().collect();
        order.sort_by(|a, b| by_score_then_token((&a.0, key(a)), (&b.0, key(b))));
        order.into_iter().enumerate().map(|(i, c)| (c.0.as_str(), i + 1)).collect()
    };
    let local_ranks = rank_of(|c| c.1);
    let global_ranks = rank_of(|c| c.2);

    let mut out: Vec<KeywordCandidate<S>> = pool
        .iter()
        .map(|(t, l, g)| {
            let (rl, rg) = (local_ranks[t.as_str()], global_ranks[t.as_str()]);
            KeywordCandidate {
                token: t.clone(),
                local_score: *l,
                global_score: *g,
                rank_local: rl,
                rank_global: rg,
                fused: S::one() / S::of_usize(rl) + S::one() / S::of_usize(rg),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.cmp_fused(a)
            .then_with(|| b.local_score.partial_cmp(&a.local_score).unwrap_or(Ordering::Equal))
            .then_with(|| a.token.cmp(&b.token))
    });
    Ok(out)
}

/// The single word to append to `spec`'s query this round.
pub fn select_expansion<S: Scalar>(
    local: &HashMap<String, S>,
    global: &HashMap<String, S>,
    spec: &LabelSpec,
    m: usize,
) -> Result<KeywordCandidate<S>, ExpansionError> {
    rank_candidates(local, global, spec, m).map(|mut v| v.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn map(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(t, s)| ((*t).to_owned(), *s)).collect()
    }

    #[test]
    fn worked_example_local_score() {
        let docs: Vec<Vec<String>> = ["a b a", "a c"]
            .iter()
            .map(|t| t.split(' ').map(str::to_owned).collect())
            .collect();
        let stats = ClassTermStats::from_documents(0, &docs);
        let global: HashMap<String, u64> = [("a", 3), ("b", 3), ("c", 2)].iter().map(|(t, n)| ((*t).into(), *n)).collect();
        let l = local_score(&stats, &global, 4.0f64, 1.0).unwrap();
        // 3 * ln(1 + 4/3) * 2, evaluated to 20 digits offline
        assert!((l["a"] - 5.083_787_162_323_222).abs() < 1e-12);
        let l32 = local_score(&stats, &global, 4.0f32, 1.0).unwrap();
        assert!((l32["a"] - 5.083_787).abs() < 1e-5);
    }

    #[test]
    fn unit_counts_give_ln2() {
        let stats = ClassTermStats::from_documents(0, &[vec!["w".to_owned()]]);
        let global: HashMap<String, u64> = [("w".to_owned(), 1)].into();
        let l = local_score(&stats, &global, 1.0f64, 1.0).unwrap();
        assert!((l["w"] - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(!l.contains_key("absent"));
    }

    #[test]
    fn local_score_validates() {
        let stats = ClassTermStats::from_documents(0, &[vec!["w".to_owned(), "w".to_owned()]]);
        let short: HashMap<String, u64> = [("w".to_owned(), 1)].into();
        assert!(matches!(local_score(&stats, &short, 1.0f64, 1.0), Err(ExpansionError::InconsistentCounts(t)) if t == "w"));
        let ok: HashMap<String, u64> = [("w".to_owned(), 2)].into();
        assert!(local_score(&stats, &ok, 0.0f64, 1.0).is_err());
        assert!(local_score(&stats, &ok, 1.0f64, 0.0).is_err());
    }

    #[test]
    fn global_scores_are_cosines() {
        let mut sem = VectorTable::new(2);
        sem.push("label", &[1.0, 0.0]).unwrap();
        sem.push("same", &[2.0, 0.0]).unwrap();
        sem.push("ortho", &[0.0, 3.0]).unwrap();
        sem.push("zero", &[0.0, 0.0]).unwrap();
        let cands: Vec<String> = ["same", "ortho", "zero", "missing"].iter().map(|s| (*s).into()).collect();
        let g = global_score(&sem, &cands, "Label").unwrap();
        assert_eq!(g.scores["same"], 1.0);
        assert_eq!(g.scores["ortho"], 0.0);
        assert_eq!(g.dropped, 2);
        assert!(matches!(global_score(&sem, &cands, "nothing"), Err(StoreError::NoKnownTokens(_))));
    }

    #[test]
    fn fused_tie_goes_to_higher_local() {
        let spec = LabelSpec::new(0, "label");
        let local = map(&[("x", 5.0), ("y", 4.0)]);
        let global = map(&[("x", 0.2), ("y", 0.9)]);
        let ranked = rank_candidates(&local, &global, &spec, 10).unwrap();
        assert_eq!(ranked[0].fused, 1.5);
        assert_eq!(ranked[1].fused, 1.5);
        assert_eq!(ranked[0].token, "x");
        assert_eq!((ranked[0].rank_local, ranked[0].rank_global), (1, 2));
    }

    #[test]
    fn double_first_wins() {
        let spec = LabelSpec::new(0, "label");
        let local = map(&[("x", 5.0), ("y", 4.0), ("z", 1.0)]);
        let global = map(&[("x", 0.9), ("y", 0.5), ("z", 0.7)]);
        let best = select_expansion(&local, &global, &spec, 10).unwrap();
        assert_eq!(best.token, "x");
        assert_eq!(best.fused, 2.0);
    }

    #[test]
    fn exclusion_applies_after_top_m() {
        let mut spec = LabelSpec::new(3, "Game Theory");
        spec.push_expansion("player").unwrap();
        let local = map(&[("game", 9.0), ("theory", 8.0), ("player", 7.0), ("nash", 1.0)]);
        let global = map(&[("game", 1.0), ("theory", 1.0), ("player", 1.0), ("nash", 1.0)]);
        assert!(matches!(
            select_expansion(&local, &global, &spec, 3),
            Err(ExpansionError::EmptyCandidatePool(3))
        ));
        assert_eq!(select_expansion(&local, &global, &spec, 4).unwrap().token, "nash");
        assert!(matches!(select_expansion(&local, &global, &spec, 0), Err(ExpansionError::EmptyCandidatePool(3))));
    }

    #[test]
    fn ranks_break_ties_lexicographically() {
        let spec = LabelSpec::new(0, "q");
        let local = map(&[("b", 1.0), ("a", 1.0), ("c", 1.0)]);
        let global = map(&[("b", 0.0), ("a", 0.0), ("c", 0.0)]);
        let ranked = rank_candidates(&local, &global, &spec, 2).unwrap();
        let tokens: Vec<_> = ranked.iter().map(|c| c.token.as_str()).collect();
        assert_eq!(tokens, ["a", "b"]);
        assert!(ranked.iter().all(|c| c.rank_local >= 1 && c.rank_global >= 1));
        assert_eq!(ranked.iter().map(|c| c.rank_local).collect::<HashSet<_>>(), HashSet::from([1, 2]));
    }

    #[test]
    fn exact_fused_comparison() {
        // 1/3 + 1/6 and 1/4 + 1/4 are both one half
        let mk = |rl, rg| KeywordCandidate { token: String::new(), local_score: 0.0, global_score: 0.0, rank_local: rl, rank_global: rg, fused: 0.0 };
        assert_eq!(mk(3, 6).cmp_fused(&mk(4, 4)), Ordering::Equal);
        assert_eq!(mk(1, 2).cmp_fused(&mk(2, 1)), Ordering::Equal);
        assert_eq!(mk(1, 1).cmp_fused(&mk(1, 2)), Ordering::Greater);
    }
}
