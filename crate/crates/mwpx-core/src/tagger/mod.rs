//! Deterministic token tagging (coarse POS plus a named-entity flag) and
//! word normalization.
//!
//! The tagset is deliberately coarse: the perturbation suite only acts on
//! adjective / wh / noun / proper-noun / verb / preposition classes, so nine
//! tags cover everything the pipeline distinguishes. Backends are pluggable;
//! the bundled [`LexiconTagger`] (closed-class lexicon, suffix rules,
//! capitalization heuristics) is the default, and a trainable
//! [`perceptron::AveragedPerceptronTagger`] ships for corpora the lexicon
//! fixture does not cover.

pub mod lexicon;
pub mod normalize;
pub mod perceptron;

pub use lexicon::Lexicon;
pub use normalize::normalize_word;

use serde::{Deserialize, Serialize};

use crate::corpus::{is_number_token, is_punctuation};

/// Coarse part-of-speech tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "NOUN")]
    Noun,
    #[serde(rename = "PROPN")]
    Propn,
    #[serde(rename = "VERB")]
    Verb,
    #[serde(rename = "ADJ")]
    Adj,
    #[serde(rename = "WH")]
    Wh,
    #[serde(rename = "PREP")]
    Prep,
    #[serde(rename = "NUMTOK")]
    Numtok,
    #[serde(rename = "PUNCT")]
    Punct,
    #[serde(rename = "OTHER")]
    Other,
}

impl Tag {
    pub fn name(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Propn => "PROPN",
            Tag::Verb => "VERB",
            Tag::Adj => "ADJ",
            Tag::Wh => "WH",
            Tag::Prep => "PREP",
            Tag::Numtok => "NUMTOK",
            Tag::Punct => "PUNCT",
            Tag::Other => "OTHER",
        }
    }

    pub fn from_name(name: &str) -> Option<Tag> {
        Some(match name {
            "NOUN" => Tag::Noun,
            "PROPN" => Tag::Propn,
            "VERB" => Tag::Verb,
            "ADJ" => Tag::Adj,
            "WH" => Tag::Wh,
            "PREP" => Tag::Prep,
            "NUMTOK" => Tag::Numtok,
            "PUNCT" => Tag::Punct,
            "OTHER" => Tag::Other,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A surface token with its tag and normalized form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub tag: Tag,
    pub normalized: String,
}

/// A deterministic tagging backend: identical input yields identical output.
pub trait TaggerBackend: Send + Sync {
    fn name(&self) -> &str;

    /// Tag a full sentence worth of tokens; must be length-preserving.
    fn tag(&self, tokens: &[String]) -> Vec<Tag>;
}

/// Tag tokens with the given backend. Tags are computed over the full
/// original sentence context. Tokens matching `number[0-9]+` always receive
/// NUMTOK, overriding the backend.
pub fn tag_tokens(tokens: &[String], backend: &dyn TaggerBackend) -> Vec<TaggedToken> {
    let tags = backend.tag(tokens);
    assert_eq!(
        tags.len(),
        tokens.len(),
        "backend {} is not length-preserving",
        backend.name()
    );
    tokens
        .iter()
        .zip(tags)
        .map(|(surface, tag)| {
            let tag = if is_number_token(surface) { Tag::Numtok } else { tag };
            TaggedToken {
                surface: surface.clone(),
                tag,
                normalized: normalize_word(surface),
            }
        })
        .collect()
}

/// Mark person-name tokens: PROPN-tagged tokens that the lexicon does not
/// list as non-person proper nouns (months, weekdays stay unmarked).
pub fn detect_named_entities(tagged: &[TaggedToken]) -> Vec<bool> {
    let lex = lexicon::bundled();
    tagged
        .iter()
        .map(|t| t.tag == Tag::Propn && !lex.is_non_person_proper(&t.surface.to_lowercase()))
        .collect()
}

/// The bundled deterministic backend: lexicon lookup, first-name list,
/// capitalization heuristics, then suffix rules with a plural-stem lookup.
#[derive(Debug, Clone)]
pub struct LexiconTagger {
    lexicon: Lexicon,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        Self {
            lexicon: lexicon::bundled().clone(),
        }
    }
}

impl LexiconTagger {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    fn tag_one(&self, tokens: &[String], idx: usize) -> Tag {
        let surface = &tokens[idx];
        if is_number_token(surface) {
            return Tag::Numtok;
        }
        if is_punctuation(surface) {
            return Tag::Punct;
        }
        let lower = surface.to_lowercase();
        if let Some(tag) = self.lexicon.tag_of(&lower) {
            return tag;
        }
        let capitalized = surface.chars().next().is_some_and(|c| c.is_uppercase());
        if capitalized && self.lexicon.is_first_name(&lower) {
            return Tag::Propn;
        }
        if capitalized && !sentence_initial(tokens, idx) {
            return Tag::Propn;
        }
        self.suffix_tag(&lower)
    }

    fn suffix_tag(&self, lower: &str) -> Tag {
        let n = lower.len();
        if n >= 5 && (lower.ends_with("ing") || lower.ends_with("ed")) {
            return Tag::Verb;
        }
        if lower.ends_with('s') && !lower.ends_with("ss") && n >= 3 {
            // Plural or third-person: tag by the stem when the lexicon
            // knows it ("costs" -> NOUN via "costs"/"cost", "starts" -> VERB).
            for stem in [&lower[..n - 1], lower.strip_suffix("es").unwrap_or("")] {
                if stem.len() >= 2 {
                    if let Some(tag) = self.lexicon.tag_of(stem) {
                        return tag;
                    }
                }
            }
            if let Some(stem) = lower.strip_suffix("ies") {
                if let Some(tag) = self.lexicon.tag_of(&format!("{stem}y")) {
                    return tag;
                }
            }
            return Tag::Noun;
        }
        if lower.ends_with("ly") && n >= 5 {
            return Tag::Other;
        }
        for adj_suffix in ["ful", "ous", "ive", "able", "ible", "ish", "al"] {
            if n >= adj_suffix.len() + 3 && lower.ends_with(adj_suffix) {
                return Tag::Adj;
            }
        }
        Tag::Noun
    }
}

impl TaggerBackend for LexiconTagger {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn tag(&self, tokens: &[String]) -> Vec<Tag> {
        (0..tokens.len()).map(|i| self.tag_one(tokens, i)).collect()
    }
}

/// First token of the text, or first after sentence-final punctuation.
fn sentence_initial(tokens: &[String], idx: usize) -> bool {
    if idx == 0 {
        return true;
    }
    matches!(tokens[idx - 1].as_str(), "." | "?" | "!")
}
