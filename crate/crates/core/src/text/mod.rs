//! Text front end: normalization, tokenization, UPOS tagging, vocabulary
//! construction and integer encoding.

mod embed;
mod tagger;
mod tokenize;
mod vocab;

pub use embed::EmbeddingTable;
pub use tagger::Tagger;
pub use tokenize::normalize_and_tokenize;
pub use vocab::{
    IdSeq, Vocabulary, OOV_INDEX, OOV_TOKEN, PAD_INDEX, PAD_TOKEN, PLACEHOLDER_INDEX,
    PLACEHOLDER_TOKEN,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("tagger model missing: {0}")]
    TaggerModelMissing(String),
    #[error("malformed tagger line {0}: {1}")]
    MalformedTaggerLine(usize, String),
    #[error("malformed embedding line {0}")]
    MalformedLine(usize),
    #[error("embedding dimension mismatch: file has {found}, requested {requested}")]
    DimensionMismatch { found: usize, requested: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Universal POS categories used by the attack: the ten tags tracked by the
/// random-deletion study plus a catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UposTag {
    Noun,
    Verb,
    Adj,
    Pron,
    Adp,
    Adv,
    Det,
    Aux,
    Cconj,
    Propn,
    Other,
}

impl UposTag {
    pub const ALL: [UposTag; 11] = [
        UposTag::Noun,
        UposTag::Verb,
        UposTag::Adj,
        UposTag::Pron,
        UposTag::Adp,
        UposTag::Adv,
        UposTag::Det,
        UposTag::Aux,
        UposTag::Cconj,
        UposTag::Propn,
        UposTag::Other,
    ];

    /// The ten tags of the random-attack histogram (everything except Other).
    pub const STUDIED: [UposTag; 10] = [
        UposTag::Noun,
        UposTag::Verb,
        UposTag::Adj,
        UposTag::Pron,
        UposTag::Adp,
        UposTag::Adv,
        UposTag::Det,
        UposTag::Aux,
        UposTag::Cconj,
        UposTag::Propn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            UposTag::Noun => "NOUN",
            UposTag::Verb => "VERB",
            UposTag::Adj => "ADJ",
            UposTag::Pron => "PRON",
            UposTag::Adp => "ADP",
            UposTag::Adv => "ADV",
            UposTag::Det => "DET",
            UposTag::Aux => "AUX",
            UposTag::Cconj => "CCONJ",
            UposTag::Propn => "PROPN",
            UposTag::Other => "OTHER",
        }
    }
}

impl fmt::Display for UposTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UposTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NOUN" => Ok(UposTag::Noun),
            "VERB" => Ok(UposTag::Verb),
            "ADJ" => Ok(UposTag::Adj),
            "PRON" => Ok(UposTag::Pron),
            "ADP" => Ok(UposTag::Adp),
            "ADV" => Ok(UposTag::Adv),
            "DET" => Ok(UposTag::Det),
            "AUX" => Ok(UposTag::Aux),
            "CCONJ" => Ok(UposTag::Cconj),
            "PROPN" => Ok(UposTag::Propn),
            "OTHER" => Ok(UposTag::Other),
            other => Err(format!("unknown UPOS tag: {other}")),
        }
    }
}

/// An ordered sequence of lowercase tokens. Every token is nonempty and
/// whitespace-free, so joining on spaces and re-tokenizing round-trips.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|s| s.as_str())
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

/// A tokenized review with one UPOS tag per token and its gold polarity
/// label (0 = negative, 1 = positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedReview {
    pub id: u64,
    pub tokens: TokenSeq,
    pub tags: Vec<UposTag>,
    pub label: u8,
}

impl TaggedReview {
    pub fn new(id: u64, tokens: TokenSeq, tags: Vec<UposTag>, label: u8) -> Self {
        assert_eq!(tokens.len(), tags.len(), "one tag per token");
        assert!(label <= 1, "binary polarity label");
        TaggedReview { id, tokens, tags, label }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
