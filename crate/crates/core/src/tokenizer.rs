//! Word-level tokenization shared by the language model and the classifier
//! features.
//!
//! Text is lowercased and split on Unicode whitespace; leading and trailing
//! ASCII punctuation is peeled off each word into single-character tokens.
//! Every sentence is wrapped in `<s>` ... `</s>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

pub type TokenId = u32;

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const HEADER_PREFIX: &str = "#activeprune-vocab min_count=";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("vocabulary file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    min_count: u32,
}

/// Call `f` on every word token of `text`, in order. Tokens are lowercased
/// and leading or trailing ASCII punctuation is split off one character at
/// a time. Allocates only when a word is not already lowercase ASCII.
pub fn for_each_word(text: &str, mut f: impl FnMut(&str)) {
    for raw in text.split_whitespace() {
        let lowered;
        let word = if raw.bytes().any(|b| !b.is_ascii() || b.is_ascii_uppercase()) {
            // str::to_lowercase handles context-dependent cases like final sigma.
            lowered = raw.to_lowercase();
            lowered.as_str()
        } else {
            raw
        };
        let bytes = word.as_bytes();
        let start = bytes
            .iter()
            .position(|b| !b.is_ascii_punctuation())
            .unwrap_or(bytes.len());
        let end = bytes
            .iter()
            .rposition(|b| !b.is_ascii_punctuation())
            .map_or(start, |p| p + 1);
        // ASCII punctuation bytes are always char boundaries.
        for i in 0..start {
            f(&word[i..i + 1]);
        }
        if start < end {
            f(&word[start..end]);
        }
        for i in end..word.len() {
            f(&word[i..i + 1]);
        }
    }
}

/// Split `text` into word tokens without any vocabulary lookup.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for_each_word(text, |w| out.push(w.to_string()));
    out
}

impl Vocabulary {
    pub const UNK_ID: TokenId = 0;
    pub const BOS_ID: TokenId = 1;
    pub const EOS_ID: TokenId = 2;

    fn with_specials(min_count: u32) -> Self {
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            min_count,
        };
        for s in [UNK, BOS, EOS] {
            v.push(s.to_string());
        }
        v
    }

    fn push(&mut self, token: String) {
        let id = self.id_to_token.len() as TokenId;
        self.token_to_id.insert(token.clone(), id);
        self.id_to_token.push(token);
    }

    /// Tokens with count ≥ `min_count`, most frequent first, ties in
    /// lexicographic order.
    pub fn build<I, S>(corpus: I, min_count: u32) -> Result<Self, TokenizerError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if min_count == 0 {
            return Err(TokenizerError::InvalidMinCount);
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut lines = 0usize;
        for line in corpus {
            lines += 1;
            for tok in split_words(line.as_ref()) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        if lines == 0 {
            return Err(TokenizerError::EmptyCorpus);
        }
        let mut kept: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count as u64 && ![UNK, BOS, EOS].contains(&t.as_str()))
            .collect();
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut v = Self::with_specials(min_count);
        for (tok, _) in kept {
            v.push(tok);
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// `[<s>, ids..., </s>]`, with out-of-vocabulary words mapped to `<unk>`.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(text.len() / 4 + 2);
        ids.push(Self::BOS_ID);
        for_each_word(text, |w| ids.push(self.id(w).unwrap_or(Self::UNK_ID)));
        ids.push(Self::EOS_ID);
        ids
    }

    /// Header line, then one token per line in id order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{HEADER_PREFIX}{}\n", self.min_count);
        for tok in &self.id_to_token {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TokenizerError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| TokenizerError::Format("missing header".into()))?;
        let min_count = header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| TokenizerError::Format(format!("bad header {header:?}")))?;
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
            min_count,
        };
        for (i, line) in lines.enumerate() {
            if line.is_empty() || line.chars().any(char::is_whitespace) {
                return Err(TokenizerError::Format(format!("bad token on line {}", i + 2)));
            }
            if v.token_to_id.contains_key(line) {
                return Err(TokenizerError::Format(format!("duplicate token {line:?}")));
            }
            v.push(line.to_string());
        }
        if v.id_to_token.get(..3) != Some(&[UNK.to_string(), BOS.to_string(), EOS.to_string()][..]) {
            return Err(TokenizerError::Format("specials must come first".into()));
        }
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        Ok(fs::write(path, self.to_text())?)
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &Vocabulary, words: &[&str]) -> Vec<TokenId> {
        words.iter().map(|w| v.id(w).unwrap()).collect()
    }

    #[test]
    fn min_count_one_keeps_everything() {
        let v = Vocabulary::build(["a b a"], 1).unwrap();
        assert_eq!(v.tokens(), ["<unk>", "<s>", "</s>", "a", "b"]);
    }

    #[test]
    fn min_count_two_drops_singletons() {
        let v = Vocabulary::build(["a b a"], 2).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v.id("b"), None);
        assert_eq!(v.tokenize("b"), vec![1, 0, 2]);
    }

    #[test]
    fn tokenize_wraps_and_maps_unknowns() {
        let v = Vocabulary::build(["a b"], 1).unwrap();
        let mut expect = vec![Vocabulary::BOS_ID];
        expect.extend(ids(&v, &["a", "b"]));
        expect.push(Vocabulary::EOS_ID);
        assert_eq!(v.tokenize("a b"), expect);

        let v = Vocabulary::build(["a"], 1).unwrap();
        assert_eq!(
            v.tokenize("a z"),
            vec![Vocabulary::BOS_ID, v.id("a").unwrap(), Vocabulary::UNK_ID, Vocabulary::EOS_ID]
        );
    }

    #[test]
    fn lowercasing_matches_str_rules() {
        assert_eq!(split_words("ΟΔΟΣ Straße"), ["οδος", "straße"]);
        assert_eq!(split_words("ΟΔΟΣ")[0], "ΟΔΟΣ".to_lowercase());
    }

    #[test]
    fn punctuation_is_peeled() {
        assert_eq!(
            split_words("Hello, (World)! don't ..."),
            ["hello", ",", "(", "world", ")", "!", "don't", ".", ".", "."]
        );
        assert_eq!(split_words("Ünïcode\u{00a0}SPACE"), ["ünïcode", "space"]);
    }

    #[test]
    fn specials_in_text_do_not_collide() {
        assert_eq!(split_words("<unk>"), ["<", "unk", ">"]);
    }

    #[test]
    fn empty_corpus_errors() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            Vocabulary::build(empty, 1),
            Err(TokenizerError::EmptyCorpus)
        ));
        assert!(Vocabulary::build(["a"], 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::build(["the cat sat on the mat ."], 1).unwrap();
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert!(Vocabulary::from_text("garbage\n").is_err());
    }
}
