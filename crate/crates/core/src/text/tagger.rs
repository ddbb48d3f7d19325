use super::{TextError, TokenSeq, UposTag};
use std::collections::HashMap;
use std::path::Path;

/// The tagger data bundled with the crate.
const BUNDLED_MODEL: &str = include_str!("../../data/tagger_upos.txt");

const MODEL_HEADER: &str = "upos-tagger v1";

/// Lexicon-plus-suffix UPOS tagger.
///
/// Tags are assigned per token: an exact lexicon hit wins, otherwise the
/// best-weighted matching suffix rule, otherwise the default tag. The model
/// is a plain text feature->weight table (see `data/tagger_upos.txt`), so
/// tagging is fully deterministic.
#[derive(Debug, Clone)]
pub struct Tagger {
    lexicon: HashMap<String, (UposTag, f32)>,
    // (suffix, tag, weight), sorted by weight desc then suffix length desc
    suffixes: Vec<(String, UposTag, f32)>,
    default_tag: UposTag,
}

impl Tagger {
    /// Load the tagger model bundled into the binary.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_MODEL).expect("bundled tagger model is well-formed")
    }

    /// Load a tagger model from a data file.
    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| TextError::TaggerModelMissing(path.display().to_string()))?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<Self, TextError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == MODEL_HEADER => {}
            other => {
                return Err(TextError::MalformedTaggerLine(
                    1,
                    format!("expected header {MODEL_HEADER:?}, got {:?}", other.map(|o| o.1)),
                ))
            }
        }

        let mut lexicon = HashMap::new();
        let mut suffixes = Vec::new();
        let mut default_tag = UposTag::Noun;
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| TextError::MalformedTaggerLine(idx + 1, msg.to_string());
            match fields.as_slice() {
                ["w", word, tag, weight] => {
                    let tag: UposTag = tag.parse().map_err(|e: String| bad(&e))?;
                    let weight: f32 = weight.parse().map_err(|_| bad("bad weight"))?;
                    let entry = lexicon.entry(word.to_string()).or_insert((tag, f32::MIN));
                    if weight > entry.1 {
                        *entry = (tag, weight);
                    }
                }
                ["s", suffix, tag, weight] => {
                    let tag: UposTag = tag.parse().map_err(|e: String| bad(&e))?;
                    let weight: f32 = weight.parse().map_err(|_| bad("bad weight"))?;
                    suffixes.push((suffix.to_string(), tag, weight));
                }
                ["d", tag, _weight] => {
                    default_tag = tag.parse().map_err(|e: String| bad(&e))?;
                }
                _ => return Err(bad("expected `w`, `s` or `d` record")),
            }
        }
        suffixes.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap()
                .then(b.0.len().cmp(&a.0.len()))
                .then(a.0.cmp(&b.0))
        });
        Ok(Tagger { lexicon, suffixes, default_tag })
    }

    pub fn tag_token(&self, token: &str) -> UposTag {
        if let Some(&(tag, _)) = self.lexicon.get(token) {
            return tag;
        }
        for (suffix, tag, _) in &self.suffixes {
            if token.len() > suffix.len() && token.ends_with(suffix.as_str()) {
                return *tag;
            }
        }
        self.default_tag
    }

    /// One tag per token, in order.
    pub fn tag_pos(&self, tokens: &TokenSeq) -> Vec<UposTag> {
        tokens.iter().map(|t| self.tag_token(t)).collect()
    }
}
