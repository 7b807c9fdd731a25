//! Tokenization shared by the matcher and the utterance classifier.
//!
//! Text is lowercased, apostrophes are dropped (`don't` -> `dont`) and every
//! other non-alphanumeric character splits tokens. Content tokens are the
//! tokens that survive stop-word removal.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

/// Version tag of the bundled stop list. Recorded in session logs so that
/// deterministic scores can be replayed against the same list.
pub const STOPWORDS_VERSION: &str = "stopwords-v1";
/// Version tag of the bundled rudeness lexicon.
pub const PROFANITY_VERSION: &str = "profanity-v1";

const STOPWORDS_RAW: &str = include_str!("../data/stopwords-v1.txt");
const PROFANITY_RAW: &str = include_str!("../data/profanity-v1.txt");

fn word_list(raw: &'static str) -> HashSet<&'static str> {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| word_list(STOPWORDS_RAW))
}

fn profanity() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| word_list(PROFANITY_RAW))
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

pub fn is_profane(token: &str) -> bool {
    profanity().contains(token)
}

/// All tokens in order, duplicates kept.
pub fn tokens(text: &str) -> Vec<String> {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|c| *c != '\'' && *c != '\u{2019}')
        .collect();
    lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Set of tokens that are not stop words.
pub fn content_tokens(text: &str) -> BTreeSet<String> {
    tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}
