//! Bundled lexicon fixture: closed-class words, common MWP content words,
//! non-person proper nouns (months, weekdays), and a first-name list.
//!
//! File formats: one `word<TAB>tag` per line for the word lexicon, one name
//! per line for first names. `#` starts a comment line in either file.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use super::Tag;

const LEXICON_TSV: &str = include_str!("../../data/lexicon.tsv");
const FIRST_NAMES: &str = include_str!("../../data/first_names.txt");

/// A word-to-tag lookup plus a person-name list.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: HashMap<String, Tag>,
    first_names: HashSet<String>,
}

impl Lexicon {
    pub fn from_strings(lexicon_tsv: &str, first_names: &str) -> Result<Self, String> {
        let mut words = HashMap::new();
        for (idx, line) in lexicon_tsv.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| format!("lexicon line {}: expected word<TAB>tag", idx + 1))?;
            let tag = Tag::from_name(tag.trim())
                .ok_or_else(|| format!("lexicon line {}: unknown tag {tag:?}", idx + 1))?;
            words.insert(word.trim().to_lowercase(), tag);
        }
        let first_names = first_names
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Ok(Self { words, first_names })
    }

    /// Load the two lexicon files from disk.
    pub fn from_files(
        lexicon_path: &std::path::Path,
        names_path: &std::path::Path,
    ) -> Result<Self, String> {
        let lex = std::fs::read_to_string(lexicon_path).map_err(|e| e.to_string())?;
        let names = std::fs::read_to_string(names_path).map_err(|e| e.to_string())?;
        Self::from_strings(&lex, &names)
    }

    pub fn tag_of(&self, lowercase_word: &str) -> Option<Tag> {
        self.words.get(lowercase_word).copied()
    }

    pub fn contains(&self, lowercase_word: &str) -> bool {
        self.words.contains_key(lowercase_word)
    }

    pub fn is_first_name(&self, lowercase_word: &str) -> bool {
        self.first_names.contains(lowercase_word)
    }

    /// True for proper nouns the lexicon knows are not person names
    /// (months, weekdays).
    pub fn is_non_person_proper(&self, lowercase_word: &str) -> bool {
        self.tag_of(lowercase_word) == Some(Tag::Propn)
    }
}

/// The lexicon bundled into the binary.
pub fn bundled() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(|| {
        Lexicon::from_strings(LEXICON_TSV, FIRST_NAMES).expect("bundled lexicon parses")
    })
}
