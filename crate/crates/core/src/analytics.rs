//! Corpus descriptions: text-length statistics and word-frequency tables
//! (top-k lists per class and the full table for word-cloud plotting).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// The NLTK English stopword list (179 entries, original order). The
/// apostrophe forms can never match a token produced by the
/// split-on-non-alphanumeric rule; they are kept so the shipped list is
/// the standard one verbatim. Override via the CLI stopwords flag.
pub const ENGLISH_STOPWORDS: &[&str] = &[
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has",
    "had", "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or",
    "because", "as", "until", "while", "of", "at", "by", "for", "with", "about", "against",
    "between", "into", "through", "during", "before", "after", "above", "below", "to", "from",
    "up", "down", "in", "out", "on", "off", "over", "under", "again", "further", "then", "once",
    "here", "there", "when", "where", "why", "how", "all", "any", "both", "each", "few", "more",
    "most", "other", "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than",
    "too", "very", "s", "t", "can", "will", "just", "don", "don't", "should", "should've", "now",
    "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn",
    "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn",
    "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't",
    "shouldn", "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn",
    "wouldn't",
];

pub fn default_stopwords() -> BTreeSet<String> {
    ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("cannot compute length statistics of an empty corpus")]
    EmptyCorpus,
}

/// Min/mean/max of text length in characters (Unicode scalars) and in
/// whitespace-delimited words.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthStats {
    pub char_min: u64,
    pub char_mean: f64,
    pub char_max: u64,
    pub word_min: u64,
    pub word_mean: f64,
    pub word_max: u64,
}

/// Word counts, highest first; ties broken lexicographically ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordFrequencyTable {
    pub entries: Vec<(String, u64)>,
}

pub fn length_stats(texts: &[impl AsRef<str>]) -> Result<LengthStats, AnalyticsError> {
    if texts.is_empty() {
        return Err(AnalyticsError::EmptyCorpus);
    }
    let mut char_min = u64::MAX;
    let mut char_max = 0u64;
    let mut char_total = 0u64;
    let mut word_min = u64::MAX;
    let mut word_max = 0u64;
    let mut word_total = 0u64;
    for text in texts {
        let chars = text.as_ref().chars().count() as u64;
        let words = text.as_ref().split_whitespace().count() as u64;
        char_min = char_min.min(chars);
        char_max = char_max.max(chars);
        char_total += chars;
        word_min = word_min.min(words);
        word_max = word_max.max(words);
        word_total += words;
    }
    let n = texts.len() as f64;
    Ok(LengthStats {
        char_min,
        char_mean: char_total as f64 / n,
        char_max,
        word_min,
        word_mean: word_total as f64 / n,
        word_max,
    })
}

/// Lowercases, splits on any non-alphanumeric character, and drops
/// stopwords, single-character tokens, and all-digit tokens.
fn surviving_tokens<'a>(
    texts: &'a [impl AsRef<str>],
    stopwords: &'a BTreeSet<String>,
) -> impl Iterator<Item = String> + 'a {
    texts.iter().flat_map(move |text| {
        text.as_ref()
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|token| {
                !token.is_empty()
                    && token.chars().count() > 1
                    && !token.chars().all(|c| c.is_numeric())
                    && !stopwords.contains(*token)
            })
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
    })
}

/// Full frequency table over the surviving tokens.
pub fn word_cloud_export(
    texts: &[impl AsRef<str>],
    stopwords: &BTreeSet<String>,
) -> WordFrequencyTable {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for token in surviving_tokens(texts, stopwords) {
        *counts.entry(token).or_insert(0) += 1;
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    // BTreeMap yields words ascending; sorting by count descending with a
    // lexicographic tie-break gives the documented order.
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    WordFrequencyTable { entries }
}

/// The k highest-count entries (fewer when the vocabulary is smaller).
pub fn top_k_words(
    texts: &[impl AsRef<str>],
    k: usize,
    stopwords: &BTreeSet<String>,
) -> WordFrequencyTable {
    debug_assert!(k >= 1, "top_k_words needs k >= 1");
    let mut table = word_cloud_export(texts, stopwords);
    table.entries.truncate(k);
    table
}
