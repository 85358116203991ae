//! Token vocabularies for the seq2seq solver.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::MathWordProblem;
use crate::equation::EqToken;

pub const PAD: usize = 0;
/// Input-vocabulary unknown token.
pub const UNK: usize = 1;
/// Output-vocabulary sequence delimiters.
pub const SOS: usize = 1;
pub const EOS: usize = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const SOS_TOKEN: &str = "<sos>";
pub const EOS_TOKEN: &str = "<eos>";

/// An injective token-to-index mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { tokens, index }
    }

    /// Rebuild the lookup map after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn sha256(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Input vocabulary: PAD, UNK, then corpus tokens in first-appearance order.
pub fn build_input_vocab(train_set: &[MathWordProblem]) -> Vocab {
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for p in train_set {
        for t in &p.tokens {
            if !seen.contains_key(t.as_str()) {
                seen.insert(t, ());
                tokens.push(t.clone());
            }
        }
    }
    Vocab::from_tokens(tokens)
}

/// Output vocabulary: delimiters, the four operators, then `number0..numberN`
/// where N is the largest index any training equation or question uses.
/// Constants are excluded by design.
pub fn build_output_vocab(train_set: &[MathWordProblem]) -> Vocab {
    let max_index = train_set
        .iter()
        .flat_map(|p| {
            p.equation
                .max_number_index()
                .into_iter()
                .chain(if p.numbers.is_empty() { None } else { Some(p.numbers.len() - 1) })
        })
        .max();
    let mut tokens = vec![
        PAD_TOKEN.to_string(),
        SOS_TOKEN.to_string(),
        EOS_TOKEN.to_string(),
        "+".to_string(),
        "-".to_string(),
        "*".to_string(),
        "/".to_string(),
    ];
    if let Some(max_index) = max_index {
        for k in 0..=max_index {
            tokens.push(format!("number{k}"));
        }
    }
    Vocab::from_tokens(tokens)
}

/// Encode question tokens; unknown words map to UNK.
pub fn encode_input(vocab: &Vocab, tokens: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.id_of(t).unwrap_or(UNK))
        .collect()
}

/// Encode a gold equation; every token must be in the output vocabulary.
pub fn encode_equation(vocab: &Vocab, tokens: &[EqToken]) -> Result<Vec<usize>, String> {
    tokens
        .iter()
        .map(|t| {
            let s = t.to_string();
            vocab
                .id_of(&s)
                .ok_or_else(|| format!("equation token {s:?} is not in the output vocabulary"))
        })
        .collect()
}
