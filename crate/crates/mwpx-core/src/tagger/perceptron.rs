//! A small averaged-perceptron tagger, trainable on `word<TAB>tag` sentences.
//!
//! Greedy left-to-right decoding with the usual contextual features. Training
//! shuffles with a seeded generator and prediction breaks score ties by tag
//! name, so the backend honors the determinism contract.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tag, TaggerBackend};
use crate::corpus::{is_number_token, is_punctuation};

type Weights = HashMap<String, HashMap<Tag, f64>>;

#[derive(Debug, Clone, Default)]
pub struct AveragedPerceptronTagger {
    weights: Weights,
    /// Unambiguous frequent words bypass the model.
    word_tags: HashMap<String, Tag>,
    classes: Vec<Tag>,
}

impl AveragedPerceptronTagger {
    /// Train on tagged sentences for a fixed number of passes.
    pub fn train(sentences: &[Vec<(String, Tag)>], iterations: usize, seed: u64) -> Self {
        let mut classes: Vec<Tag> = Vec::new();
        for sent in sentences {
            for (_, tag) in sent {
                if !classes.contains(tag) {
                    classes.push(*tag);
                }
            }
        }
        classes.sort();

        let word_tags = unambiguous_words(sentences);
        let mut weights: Weights = HashMap::new();
        let mut totals: HashMap<(String, Tag), f64> = HashMap::new();
        let mut stamps: HashMap<(String, Tag), f64> = HashMap::new();
        let mut instances = 0.0f64;

        let mut order: Vec<usize> = (0..sentences.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..iterations {
            order.shuffle(&mut rng);
            for &si in &order {
                let sent = &sentences[si];
                let words: Vec<String> = sent.iter().map(|(w, _)| w.clone()).collect();
                let mut prev = Tag::Other;
                let mut prev2 = Tag::Other;
                for (i, (word, truth)) in sent.iter().enumerate() {
                    instances += 1.0;
                    let guess = if let Some(t) = fixed_tag(word, &word_tags) {
                        t
                    } else {
                        let feats = features(&words, i, prev, prev2);
                        let guess = predict(&weights, &classes, &feats);
                        if guess != *truth {
                            for f in &feats {
                                update(&mut weights, &mut totals, &mut stamps, instances, f, *truth, 1.0);
                                update(&mut weights, &mut totals, &mut stamps, instances, f, guess, -1.0);
                            }
                        }
                        guess
                    };
                    prev2 = prev;
                    prev = guess;
                }
            }
        }

        // Average: finalize accumulated totals.
        for (feat, by_tag) in weights.iter_mut() {
            for (tag, w) in by_tag.iter_mut() {
                let key = (feat.clone(), *tag);
                let total = totals.get(&key).copied().unwrap_or(0.0)
                    + (instances - stamps.get(&key).copied().unwrap_or(0.0)) * *w;
                *w = total / instances.max(1.0);
            }
        }

        Self {
            weights,
            word_tags,
            classes,
        }
    }
}

fn fixed_tag(word: &str, word_tags: &HashMap<String, Tag>) -> Option<Tag> {
    if is_number_token(word) {
        return Some(Tag::Numtok);
    }
    if is_punctuation(word) {
        return Some(Tag::Punct);
    }
    word_tags.get(&word.to_lowercase()).copied()
}

fn update(
    weights: &mut Weights,
    totals: &mut HashMap<(String, Tag), f64>,
    stamps: &mut HashMap<(String, Tag), f64>,
    instances: f64,
    feat: &str,
    tag: Tag,
    delta: f64,
) {
    let w = weights
        .entry(feat.to_string())
        .or_default()
        .entry(tag)
        .or_insert(0.0);
    let key = (feat.to_string(), tag);
    let stamp = stamps.get(&key).copied().unwrap_or(0.0);
    *totals.entry(key.clone()).or_insert(0.0) += (instances - stamp) * *w;
    stamps.insert(key, instances);
    *w += delta;
}

fn predict(weights: &Weights, classes: &[Tag], feats: &[String]) -> Tag {
    let mut scores: HashMap<Tag, f64> = HashMap::new();
    for f in feats {
        if let Some(by_tag) = weights.get(f) {
            for (tag, w) in by_tag {
                *scores.entry(*tag).or_insert(0.0) += w;
            }
        }
    }
    // Highest score wins; ties break on tag order for determinism.
    let mut best = *classes.first().unwrap_or(&Tag::Other);
    let mut best_score = f64::NEG_INFINITY;
    for &tag in classes {
        let s = scores.get(&tag).copied().unwrap_or(0.0);
        if s > best_score {
            best = tag;
            best_score = s;
        }
    }
    best
}

fn features(words: &[String], i: usize, prev: Tag, prev2: Tag) -> Vec<String> {
    let word = &words[i];
    let lower = word.to_lowercase();
    let suffix: String = lower.chars().rev().take(3).collect::<Vec<_>>().iter().rev().collect();
    let mut feats = vec![
        "bias".to_string(),
        format!("word={lower}"),
        format!("suffix={suffix}"),
        format!("prev_tag={prev}"),
        format!("prev2_tag={prev2}"),
        format!("capitalized={}", word.chars().next().is_some_and(|c| c.is_uppercase())),
        format!("initial={}", i == 0 || matches!(words[i - 1].as_str(), "." | "?" | "!")),
    ];
    if i > 0 {
        feats.push(format!("prev_word={}", words[i - 1].to_lowercase()));
    }
    if i + 1 < words.len() {
        feats.push(format!("next_word={}", words[i + 1].to_lowercase()));
    }
    feats
}

/// Words that occur often and almost always with one tag.
fn unambiguous_words(sentences: &[Vec<(String, Tag)>]) -> HashMap<String, Tag> {
    let mut counts: HashMap<String, HashMap<Tag, usize>> = HashMap::new();
    for sent in sentences {
        for (word, tag) in sent {
            *counts
                .entry(word.to_lowercase())
                .or_default()
                .entry(*tag)
                .or_insert(0) += 1;
        }
    }
    let mut out = HashMap::new();
    for (word, by_tag) in counts {
        let n: usize = by_tag.values().sum();
        let (&tag, &mode) = by_tag.iter().max_by_key(|(t, c)| (**c, std::cmp::Reverse(**t))).unwrap();
        if n >= 5 && mode as f64 / n as f64 >= 0.97 {
            out.insert(word, tag);
        }
    }
    out
}

impl TaggerBackend for AveragedPerceptronTagger {
    fn name(&self) -> &str {
        "averaged_perceptron"
    }

    fn tag(&self, tokens: &[String]) -> Vec<Tag> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut prev = Tag::Other;
        let mut prev2 = Tag::Other;
        for i in 0..tokens.len() {
            let tag = if let Some(t) = fixed_tag(&tokens[i], &self.word_tags) {
                t
            } else {
                let feats = features(tokens, i, prev, prev2);
                predict(&self.weights, &self.classes, &feats)
            };
            out.push(tag);
            prev2 = prev;
            prev = tag;
        }
        out
    }
}
