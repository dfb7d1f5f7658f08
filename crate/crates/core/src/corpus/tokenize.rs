//! Word tokenizer shared by keyword statistics, query composition and the
//! hard-match diagnostics.
//!
//! Rules, applied in order:
//! 1. lowercase the whole text;
//! 2. split on every character that is not Unicode alphanumeric;
//! 3. drop pieces shorter than two characters;
//! 4. drop pieces found in the built-in English stopword list.
//!
//! The embedding exporter extracts its vocabulary with the same rules, so the
//! stopword list is frozen in `data/stopwords.txt`.

use std::collections::HashSet;
use std::sync::OnceLock;

pub const MIN_TOKEN_CHARS: usize = 2;

static STOPWORDS_RAW: &str = include_str!("../../data/stopwords.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_RAW
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| piece.chars().count() >= MIN_TOKEN_CHARS && !is_stopword(piece))
        .map(str::to_owned)
        .collect()
}

/// True when `needle` occurs as a contiguous run inside `haystack`.
/// An empty needle never matches.
pub fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && needle.len() <= haystack.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn splits_on_punctuation() {
        assert_eq!(tokenize("Graph-based HIV models"), ["graph", "based", "hiv", "models"]);
    }

    #[test]
    fn drops_short_tokens_and_stopwords() {
        assert!(tokenize("a I x").is_empty());
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
        assert_eq!(tokenize("the role of insulin"), ["role", "insulin"]);
    }

    #[test]
    fn folds_case() {
        assert_eq!(tokenize("Insulin, insulin; INSULIN."), ["insulin", "insulin", "insulin"]);
    }

    #[test]
    fn slashes_and_parentheses() {
        assert_eq!(tokenize("HIV/AIDS"), ["hiv", "aids"]);
        assert_eq!(tokenize("Diabetes (mellitus)"), ["diabetes", "mellitus"]);
    }

    #[test]
    fn keeps_non_ascii_letters() {
        assert_eq!(tokenize("Größe α-Zerfall"), ["größe", "zerfall"]);
    }

    #[test]
    fn stopword_file_is_lowercase_and_unique() {
        let mut seen = HashSet::new();
        for w in STOPWORDS_RAW.lines() {
            assert_eq!(w, w.to_lowercase());
            assert!(seen.insert(w), "duplicate stopword {w}");
        }
    }

    #[test]
    fn contiguous_runs() {
        let hay = tokenize("chronic kidney disease in adults");
        assert!(contains_run(&hay, &tokenize("kidney disease")));
        assert!(!contains_run(&hay, &tokenize("chronic disease")));
        assert!(!contains_run(&hay, &[]));
    }

    proptest! {
        #[test]
        fn idempotent_on_joined_output(text in "[a-zA-Z0-9 ,.;:/()\\-éßΩж]{0,80}") {
            let once = tokenize(&text);
            let again = tokenize(&once.join(" "));
            prop_assert_eq!(&once, &again);
            for t in &once {
                prop_assert!(t.chars().count() >= MIN_TOKEN_CHARS);
                prop_assert!(!t.chars().any(char::is_whitespace));
            }
        }
    }
}
