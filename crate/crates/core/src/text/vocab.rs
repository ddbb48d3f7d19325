use super::{TextError, TokenSeq};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD_INDEX: u32 = 0;
pub const OOV_INDEX: u32 = 1;
pub const PLACEHOLDER_INDEX: u32 = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "<oov>";
pub const PLACEHOLDER_TOKEN: &str = "<del>";

/// Fixed-length integer encoding of a token sequence.
pub type IdSeq = Vec<u32>;

/// Word-to-index map with three reserved symbols: padding, out-of-vocabulary
/// and the deletion placeholder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    // corpus words in index order, starting at index 3
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from a corpus, keeping tokens with frequency >= `min_count`.
    ///
    /// Word order is descending frequency with lexicographic tie-break, so
    /// identical corpora produce identical vocabularies.
    pub fn build(corpus: &[TokenSeq], min_count: usize) -> Result<Self, TextError> {
        if corpus.is_empty() {
            return Err(TextError::EmptyCorpus);
        }
        assert!(min_count >= 1);
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for seq in corpus {
            for tok in seq.iter() {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(&str, usize)> =
            freq.into_iter().filter(|&(_, n)| n >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let words = entries.into_iter().map(|(w, _)| w.to_string()).collect();
        Ok(Self::from_words(words))
    }

    /// Reconstruct from a stored word list (e.g. after deserialization).
    pub fn from_words(words: Vec<String>) -> Self {
        let mut vocab = Vocabulary { words, index: HashMap::new() };
        vocab.rebuild_index();
        vocab
    }

    pub fn rebuild_index(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32 + 3))
            .collect();
    }

    /// Total entry count including the three reserved symbols.
    pub fn size(&self) -> usize {
        self.words.len() + 3
    }

    pub fn lookup(&self, token: &str) -> u32 {
        match token {
            PAD_TOKEN => PAD_INDEX,
            OOV_TOKEN => OOV_INDEX,
            PLACEHOLDER_TOKEN => PLACEHOLDER_INDEX,
            _ => self.index.get(token).copied().unwrap_or(OOV_INDEX),
        }
    }

    pub fn word(&self, index: u32) -> &str {
        match index {
            PAD_INDEX => PAD_TOKEN,
            OOV_INDEX => OOV_TOKEN,
            PLACEHOLDER_INDEX => PLACEHOLDER_TOKEN,
            i => &self.words[i as usize - 3],
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Encode to exactly `max_len` indices: truncate, then right-pad.
    pub fn encode(&self, tokens: &TokenSeq, max_len: usize) -> IdSeq {
        assert!(max_len >= 1);
        let mut ids: IdSeq = tokens.iter().take(max_len).map(|t| self.lookup(t)).collect();
        ids.resize(max_len, PAD_INDEX);
        ids
    }

    /// Encode a plain token slice (used for manipulated reviews that carry
    /// the placeholder token).
    pub fn encode_tokens(&self, tokens: &[String], max_len: usize) -> IdSeq {
        assert!(max_len >= 1);
        let mut ids: IdSeq =
            tokens.iter().take(max_len).map(|t| self.lookup(t)).collect();
        ids.resize(max_len, PAD_INDEX);
        ids
    }
}
