//! Uncased WordPiece tokenization: vocabulary handling, text
//! normalization, greedy longest-match-first piece splitting, and framing
//! into the three fixed-width arrays the encoder consumes.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const CLS_TOKEN: &str = "[CLS]";
pub const SEP_TOKEN: &str = "[SEP]";

/// Upper sequence width used when none is configured; matches the three
/// 128-wide input arrays the classifier expects.
pub const DEFAULT_MAX_LEN: usize = 128;

/// Words longer than this map straight to [UNK] instead of being pieced.
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary file is empty")]
    Empty,
    #[error("vocabulary is missing the special token {token}")]
    MissingSpecial { token: &'static str },
    #[error("duplicate vocabulary token {token:?} at line {line}")]
    Duplicate { token: String, line: usize },
    #[error("empty vocabulary line {line} (one token per line)")]
    EmptyLine { line: usize },
}

/// Token table: id = zero-based line index in the vocabulary file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
    pad_id: u32,
    unk_id: u32,
    cls_id: u32,
    sep_id: u32,
}

impl Vocabulary {
    /// Parses one token per line; ids are dense line indices. The four
    /// special tokens must all be present.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self, VocabError> {
        let mut token_to_id = BTreeMap::new();
        let mut id_to_token = Vec::new();
        for (idx, line) in lines.into_iter().enumerate() {
            let token = line.trim();
            if token.is_empty() {
                return Err(VocabError::EmptyLine { line: idx + 1 });
            }
            if token_to_id.insert(token.to_string(), id_to_token.len() as u32).is_some() {
                return Err(VocabError::Duplicate {
                    token: token.to_string(),
                    line: idx + 1,
                });
            }
            id_to_token.push(token.to_string());
        }
        if id_to_token.is_empty() {
            return Err(VocabError::Empty);
        }
        let special = |token: &'static str| -> Result<u32, VocabError> {
            token_to_id
                .get(token)
                .copied()
                .ok_or(VocabError::MissingSpecial { token })
        };
        Ok(Self {
            pad_id: special(PAD_TOKEN)?,
            unk_id: special(UNK_TOKEN)?,
            cls_id: special(CLS_TOKEN)?,
            sep_id: special(SEP_TOKEN)?,
            token_to_id,
            id_to_token,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn pad_id(&self) -> u32 {
        self.pad_id
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn cls_id(&self) -> u32 {
        self.cls_id
    }

    pub fn sep_id(&self) -> u32 {
        self.sep_id
    }
}

/// The three arrays one example feeds into the encoder. All are
/// `max_len` wide; the mask is a contiguous prefix of 1s; type ids are
/// all zero because inputs are single-segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub input_word_ids: Vec<u32>,
    pub input_mask: Vec<u8>,
    pub input_type_ids: Vec<u8>,
}

impl EncodedInput {
    /// Number of real (non-padding) positions.
    pub fn seq_len(&self) -> usize {
        self.input_mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Zero-width/format characters that standard uncased cleaning removes.
fn is_ignorable_format_char(c: char) -> bool {
    matches!(
        c,
        '\u{00AD}' | '\u{200B}'..='\u{200F}' | '\u{202A}'..='\u{202E}'
            | '\u{2060}'..='\u{2064}' | '\u{FEFF}'
    )
}

/// Punctuation per the uncased rule: all ASCII punctuation, plus the
/// general-punctuation block and the common fullwidth/CJK marks. An
/// approximation of "general category P" that covers this corpus.
fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}'
                | '\u{00BF}'
                | '\u{2010}'..='\u{2027}'
                | '\u{2030}'..='\u{205E}'
                | '\u{3001}' | '\u{3002}' | '\u{3008}'..='\u{3011}' | '\u{3014}'..='\u{301F}'
                | '\u{FF01}'..='\u{FF0F}' | '\u{FF1A}'..='\u{FF20}' | '\u{FF3B}'..='\u{FF40}'
                | '\u{FF5B}'..='\u{FF65}'
        )
}

/// CJK ideograph ranges whose characters are isolated as their own tokens.
fn is_cjk(c: char) -> bool {
    matches!(
        c as u32,
        0x4E00..=0x9FFF
            | 0x3400..=0x4DBF
            | 0x20000..=0x2A6DF
            | 0x2A700..=0x2B73F
            | 0x2B740..=0x2B81F
            | 0x2B820..=0x2CEAF
            | 0xF900..=0xFAFF
            | 0x2F800..=0x2FA1F
    )
}

/// Uncased basic tokenization: clean control characters, isolate CJK
/// ideographs, lowercase, strip accents (NFD, drop combining marks), and
/// split out each punctuation character as its own token.
pub fn normalize(text: &str) -> Vec<String> {
    let mut cleaned = String::with_capacity(text.len() + 8);
    for c in text.chars() {
        if c == '\u{0}' || c == '\u{FFFD}' || is_ignorable_format_char(c) {
            continue;
        }
        if c.is_whitespace() {
            cleaned.push(' ');
        } else if c.is_control() {
            continue;
        } else if is_cjk(c) {
            cleaned.push(' ');
            cleaned.push(c);
            cleaned.push(' ');
        } else {
            cleaned.push(c);
        }
    }

    let stripped: String = cleaned
        .to_lowercase()
        .nfd()
        .filter(|&c| !is_combining_mark(c))
        .collect();

    let mut tokens = Vec::new();
    for word in stripped.split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(core::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

/// Greedy longest-match-first WordPiece split of one normalized word.
/// Non-initial pieces are looked up with the `##` prefix; any position
/// with no match collapses the whole word to [UNK], as does a word longer
/// than 100 characters.
pub fn wordpiece(word: &str, vocab: &Vocabulary) -> Vec<u32> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return vec![];
    }
    if chars.len() > MAX_WORD_CHARS {
        return vec![vocab.unk_id()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut matched = None;
        let mut end = chars.len();
        while start < end {
            let mut candidate = String::new();
            if start > 0 {
                candidate.push_str("##");
            }
            candidate.extend(&chars[start..end]);
            if let Some(id) = vocab.id_of(&candidate) {
                matched = Some((id, end));
                break;
            }
            end -= 1;
        }
        match matched {
            Some((id, end)) => {
                pieces.push(id);
                start = end;
            }
            None => return vec![vocab.unk_id()],
        }
    }
    pieces
}

/// Frames text as [CLS] + wordpieces + [SEP], truncating pieces from the
/// tail to fit and padding with [PAD] to exactly `max_len` positions.
pub fn encode(text: &str, vocab: &Vocabulary, max_len: usize) -> EncodedInput {
    assert!(max_len >= 2, "max_len must fit [CLS] and [SEP]");
    let mut pieces: Vec<u32> = Vec::new();
    for word in normalize(text) {
        pieces.extend(wordpiece(&word, vocab));
    }
    pieces.truncate(max_len - 2);

    let real = pieces.len() + 2;
    let mut input_word_ids = Vec::with_capacity(max_len);
    input_word_ids.push(vocab.cls_id());
    input_word_ids.extend_from_slice(&pieces);
    input_word_ids.push(vocab.sep_id());
    input_word_ids.resize(max_len, vocab.pad_id());

    let mut input_mask = vec![1u8; real];
    input_mask.resize(max_len, 0);

    EncodedInput {
        input_word_ids,
        input_mask,
        input_type_ids: vec![0u8; max_len],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use proptest::prelude::*;

    const TINY_VOCAB: [&str; 8] = [
        "[PAD]", "[UNK]", "[CLS]", "[SEP]", "taliban", "kill", "##ed", "district",
    ];

    fn tiny_vocab() -> Vocabulary {
        Vocabulary::from_lines(TINY_VOCAB).unwrap()
    }

    #[test]
    fn vocab_assigns_line_indices() {
        let v = tiny_vocab();
        assert_eq!(v.len(), 8);
        assert_eq!(v.cls_id(), 2);
        assert_eq!(v.pad_id(), 0);
        assert_eq!(v.unk_id(), 1);
        assert_eq!(v.sep_id(), 3);
        assert_eq!(v.id_of("district"), Some(7));
        assert_eq!(v.token_of(6), Some("##ed"));
    }

    #[test]
    fn vocab_rejects_missing_special() {
        let err = Vocabulary::from_lines(["[PAD]", "[UNK]", "[CLS]", "word"]).unwrap_err();
        assert_eq!(err, VocabError::MissingSpecial { token: "[SEP]" });
    }

    #[test]
    fn vocab_rejects_duplicates() {
        let err = Vocabulary::from_lines(
            ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "taliban", "taliban"],
        )
        .unwrap_err();
        assert_eq!(err, VocabError::Duplicate { token: "taliban".to_string(), line: 6 });
    }

    #[test]
    fn vocab_rejects_empty_input() {
        assert_eq!(Vocabulary::from_lines([]).unwrap_err(), VocabError::Empty);
        assert_eq!(
            Vocabulary::from_lines(["[PAD]", " "]).unwrap_err(),
            VocabError::EmptyLine { line: 2 }
        );
    }

    #[test]
    fn normalize_splits_punctuation_and_lowercases() {
        assert_eq!(
            normalize("Taliban-led attack."),
            ["taliban", "-", "led", "attack", "."]
        );
    }

    #[test]
    fn normalize_empty_is_empty() {
        assert!(normalize("").is_empty());
    }

    #[test]
    fn normalize_strips_accents() {
        assert_eq!(normalize("Caf\u{e9}"), ["cafe"]);
    }

    #[test]
    fn normalize_drops_control_and_format_chars() {
        assert_eq!(normalize("at\u{0007}tack\u{200B}ers"), ["attackers"]);
        assert_eq!(normalize("one\ttwo\nthree"), ["one", "two", "three"]);
    }

    #[test]
    fn normalize_isolates_cjk() {
        assert_eq!(normalize("X\u{6740}\u{6B7B}y"), ["x", "\u{6740}", "\u{6B7B}", "y"]);
    }

    #[test]
    fn wordpiece_greedy_split() {
        let v = tiny_vocab();
        assert_eq!(wordpiece("killed", &v), [5, 6]);
        assert_eq!(wordpiece("taliban", &v), [4]);
        assert_eq!(wordpiece("zzz", &v), [1]);
    }

    #[test]
    fn wordpiece_maps_overlong_words_to_unk() {
        let v = tiny_vocab();
        let long: String = core::iter::repeat('k').take(101).collect();
        assert_eq!(wordpiece(&long, &v), [1]);
    }

    #[test]
    fn encode_frames_and_pads() {
        let v = tiny_vocab();
        let enc = encode("Taliban killed", &v, 128);
        assert_eq!(&enc.input_word_ids[..5], &[2, 4, 5, 6, 3]);
        assert!(enc.input_word_ids[5..].iter().all(|&id| id == 0));
        assert_eq!(&enc.input_mask[..6], &[1, 1, 1, 1, 1, 0]);
        assert!(enc.input_mask[5..].iter().all(|&m| m == 0));
        assert!(enc.input_type_ids.iter().all(|&t| t == 0));
        assert_eq!(enc.input_word_ids.len(), 128);
        assert_eq!(enc.input_mask.len(), 128);
        assert_eq!(enc.input_type_ids.len(), 128);
    }

    #[test]
    fn encode_empty_text_still_frames() {
        let v = tiny_vocab();
        let enc = encode("", &v, 128);
        assert_eq!(&enc.input_word_ids[..3], &[2, 3, 0]);
        assert_eq!(&enc.input_mask[..3], &[1, 1, 0]);
        assert_eq!(enc.seq_len(), 2);
    }

    #[test]
    fn encode_truncates_long_text_to_full_mask() {
        let v = tiny_vocab();
        let text = core::iter::repeat("killed").take(500).collect::<Vec<_>>().join(" ");
        let enc = encode(&text, &v, 128);
        assert_eq!(enc.seq_len(), 128);
        assert_eq!(enc.input_word_ids[0], 2);
        assert_eq!(enc.input_word_ids[127], 3);
    }

    #[test]
    fn round_trip_recovers_vocab_words() {
        let v = tiny_vocab();
        for word in ["taliban", "killed", "district"] {
            let ids = wordpiece(word, &v);
            let rebuilt: String = ids
                .iter()
                .map(|&id| v.token_of(id).unwrap().trim_start_matches("##"))
                .collect();
            assert_eq!(rebuilt, word);
        }
    }

    proptest! {
        #[test]
        fn encode_is_total_and_well_formed(text in ".*", extra in 0usize..40) {
            let v = tiny_vocab();
            let max_len = 2 + extra;
            let enc = encode(&text, &v, max_len);
            prop_assert_eq!(enc.input_word_ids.len(), max_len);
            prop_assert_eq!(enc.input_mask.len(), max_len);
            prop_assert_eq!(enc.input_type_ids.len(), max_len);
            // Mask is a contiguous prefix of ones.
            let real = enc.seq_len();
            prop_assert!(enc.input_mask[..real].iter().all(|&m| m == 1));
            prop_assert!(enc.input_mask[real..].iter().all(|&m| m == 0));
            // Framing: [CLS] first, [SEP] at the last real position,
            // [PAD] everywhere after.
            prop_assert_eq!(enc.input_word_ids[0], v.cls_id());
            prop_assert_eq!(enc.input_word_ids[real - 1], v.sep_id());
            prop_assert!(enc.input_word_ids[real..].iter().all(|&id| id == v.pad_id()));
            // Every id in range; mask sum matches the piece count.
            prop_assert!(enc.input_word_ids.iter().all(|&id| (id as usize) < v.len()));
            let pieces: usize = normalize(&text)
                .iter()
                .map(|w| wordpiece(w, &v).len())
                .sum();
            prop_assert_eq!(real, (2 + pieces).min(max_len));
            // Same text, same encoding.
            prop_assert_eq!(&encode(&text, &v, max_len), &enc);
        }

        #[test]
        fn normalized_tokens_have_no_uppercase_or_whitespace(text in ".*") {
            for token in normalize(&text) {
                prop_assert!(!token.is_empty());
                prop_assert!(!token.chars().any(|c| c.is_whitespace()));
                // Lowercase-stable: re-lowercasing changes nothing. (Some
                // symbols carry the Uppercase property with no lowercase
                // mapping; those are kept as-is, like the reference rule.)
                prop_assert_eq!(token.to_lowercase(), token);
            }
        }
    }

    #[test]
    fn hundred_token_vocab_traces() {
        // A fuller trace on a richer vocabulary: continuation chains.
        let lines: Vec<String> = TINY_VOCAB
            .iter()
            .map(|s| s.to_string())
            .chain(["attack", "##s", "##er", "force", "gun", "##men"].iter().map(|s| s.to_string()))
            .collect();
        let v = Vocabulary::from_lines(lines.iter().map(String::as_str)).unwrap();
        assert_eq!(
            wordpiece("attackers", &v),
            [v.id_of("attack").unwrap(), v.id_of("##er").unwrap(), v.id_of("##s").unwrap()]
        );
        assert_eq!(
            wordpiece("gunmen", &v),
            [v.id_of("gun").unwrap(), v.id_of("##men").unwrap()]
        );
        assert_eq!(format!("{}", VocabError::MissingSpecial { token: SEP_TOKEN }),
            "vocabulary is missing the special token [SEP]");
    }
}
