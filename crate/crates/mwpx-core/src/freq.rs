//! Per-operation word document frequency: which normalized words appear in
//! the most problems of each category, with the shared top-list filter.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_number_token, is_punctuation, Category, MathWordProblem};
use crate::tagger::normalize_word;

#[derive(Debug, Error)]
pub enum FreqError {
    #[error("no problems in category {0}")]
    EmptyCategory(Category),
    #[error("need all five categories, found only {0}")]
    MissingCategories(usize),
}

/// One reported word with its document count and in-category fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    /// Number of problems (documents) containing the word.
    pub count: usize,
    /// count / problems in the category.
    pub pct: f64,
}

/// Per-category top lists after removing words shared by all five lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub top_n: usize,
    pub categories: BTreeMap<Category, Vec<WordCount>>,
    /// Words that appeared in every category's pre-filter top-n list.
    pub excluded_words: BTreeSet<String>,
}

/// Distinct normalized words of one problem; number tokens and punctuation
/// are not words.
fn document_words(problem: &MathWordProblem) -> BTreeSet<String> {
    problem
        .tokens
        .iter()
        .filter(|t| !is_number_token(t) && !is_punctuation(t))
        .map(|t| normalize_word(t))
        .collect()
}

/// Document counts for one category: each problem contributes at most one
/// count per word.
pub fn word_document_counts(
    dataset: &[MathWordProblem],
    category: Category,
) -> Result<BTreeMap<String, usize>, FreqError> {
    let mut counts = BTreeMap::new();
    let mut seen_any = false;
    for p in dataset.iter().filter(|p| p.category == category) {
        seen_any = true;
        for w in document_words(p) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    if !seen_any {
        return Err(FreqError::EmptyCategory(category));
    }
    Ok(counts)
}

/// Top-n words per category by document count (ties alphabetical), then the
/// intersection of the five lists removed from each. All surviving words are
/// reported; consumers may truncate.
pub fn top_words_report(
    dataset: &[MathWordProblem],
    n: usize,
) -> Result<FrequencyReport, FreqError> {
    let present = Category::ALL
        .iter()
        .filter(|c| dataset.iter().any(|p| p.category == **c))
        .count();
    if present < Category::ALL.len() {
        return Err(FreqError::MissingCategories(present));
    }

    let mut top_lists: BTreeMap<Category, Vec<WordCount>> = BTreeMap::new();
    for &category in &Category::ALL {
        let counts = word_document_counts(dataset, category)?;
        let size = dataset.iter().filter(|p| p.category == category).count();
        let mut ranked: Vec<WordCount> = counts
            .into_iter()
            .map(|(word, count)| WordCount {
                word,
                count,
                pct: count as f64 / size as f64,
            })
            .collect();
        // count descending, then alphabetical (BTreeMap already gave
        // alphabetical order, and the sort is stable)
        ranked.sort_by_key(|w| std::cmp::Reverse(w.count));
        ranked.truncate(n);
        top_lists.insert(category, ranked);
    }

    let mut excluded: BTreeSet<String> = top_lists
        .values()
        .next()
        .expect("five categories present")
        .iter()
        .map(|w| w.word.clone())
        .collect();
    for list in top_lists.values().skip(1) {
        let words: BTreeSet<String> = list.iter().map(|w| w.word.clone()).collect();
        excluded = excluded.intersection(&words).cloned().collect();
    }

    let categories = top_lists
        .into_iter()
        .map(|(cat, list)| {
            let filtered: Vec<WordCount> = list
                .into_iter()
                .filter(|w| !excluded.contains(&w.word))
                .collect();
            (cat, filtered)
        })
        .collect();

    Ok(FrequencyReport {
        top_n: n,
        categories,
        excluded_words: excluded,
    })
}

/// CSV for one category: word,count,pct with pct rounded to two decimals for
/// display (the JSON report keeps full precision).
pub fn write_category_csv<W: std::io::Write>(
    mut w: W,
    words: &[WordCount],
) -> std::io::Result<()> {
    writeln!(w, "word,count,pct")?;
    for wc in words {
        writeln!(w, "{},{},{:.2}", wc.word, wc.count, wc.pct)?;
    }
    Ok(())
}
