//! Greedy input reduction: iteratively delete the word type whose removal
//! hurts model confidence least, until the answer turns incorrect; collect
//! traces and aggregate statistics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{is_number_token, MathWordProblem};
use crate::equation::{answers_match, evaluate_token_strings};
use crate::solver::{Prediction, Predictor};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("no traces with an initially correct prediction")]
    NoEligibleTraces,
}

/// One committed removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStep {
    pub step_index: usize,
    /// Lowercase word type; every occurrence is removed at once.
    pub removed_word: String,
    pub confidence_after: f64,
    pub correct_after: bool,
    pub remaining_tokens: Vec<String>,
}

/// The full reduction record for one problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub problem_id: String,
    pub initially_correct: bool,
    pub steps: Vec<ReductionStep>,
    /// Occurrences removed while still correct, over the original token count.
    pub removed_fraction: f64,
}

fn prediction_is_correct(prediction: &Prediction, problem: &MathWordProblem) -> bool {
    match evaluate_token_strings(&prediction.tokens, &problem.numbers) {
        Ok(value) => answers_match(value, problem.answer),
        Err(_) => false,
    }
}

/// Distinct candidate word types (lowercase, number tokens excluded) in
/// first-occurrence order, which is also the tie-break order.
fn candidate_types(tokens: &[String]) -> Vec<String> {
    let mut seen = Vec::new();
    for t in tokens {
        if is_number_token(t) {
            continue;
        }
        let lower = t.to_lowercase();
        if !seen.contains(&lower) {
            seen.push(lower);
        }
    }
    seen
}

fn remove_type(tokens: &[String], word: &str) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| t.to_lowercase() != word)
        .cloned()
        .collect()
}

/// Reduce one problem against a trained (or stubbed) predictor.
///
/// If the original prediction is already wrong the trace is empty. Otherwise
/// each round tries every candidate type, commits the removal with the
/// highest resulting confidence (ties go to the type whose first occurrence
/// is leftmost), and stops once the committed prediction's answer is wrong or
/// no candidates remain.
pub fn reduce_input(model: &dyn Predictor, problem: &MathWordProblem) -> ReductionTrace {
    let original_len = problem.tokens.len();
    let first = model.predict_tokens(&problem.tokens);
    if !prediction_is_correct(&first, problem) {
        return ReductionTrace {
            problem_id: problem.id.clone(),
            initially_correct: false,
            steps: Vec::new(),
            removed_fraction: 0.0,
        };
    }

    let mut tokens = problem.tokens.clone();
    let mut steps = Vec::new();
    let mut removed_while_correct = 0usize;

    loop {
        let candidates = candidate_types(&tokens);
        if candidates.is_empty() {
            break;
        }
        let mut best: Option<(String, Vec<String>, Prediction)> = None;
        for word in candidates {
            let remaining = remove_type(&tokens, &word);
            let prediction = model.predict_tokens(&remaining);
            let better = match &best {
                None => true,
                Some((_, _, incumbent)) => prediction.confidence > incumbent.confidence,
            };
            if better {
                best = Some((word, remaining, prediction));
            }
        }
        let (word, remaining, prediction) = best.expect("candidates were nonempty");
        let removed_count = tokens.len() - remaining.len();
        let correct = prediction_is_correct(&prediction, problem);
        tokens = remaining.clone();
        steps.push(ReductionStep {
            step_index: steps.len(),
            removed_word: word,
            confidence_after: prediction.confidence,
            correct_after: correct,
            remaining_tokens: remaining,
        });
        if !correct {
            break;
        }
        removed_while_correct += removed_count;
    }

    ReductionTrace {
        problem_id: problem.id.clone(),
        initially_correct: true,
        removed_fraction: if original_len == 0 {
            0.0
        } else {
            removed_while_correct as f64 / original_len as f64
        },
        steps,
    }
}

/// Aggregate statistics over the initially-correct traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionStatistics {
    pub mean_fraction: f64,
    pub median_fraction: f64,
    /// Ten bins of width 0.1 over [0, 1]; the last bin includes 1.0.
    pub histogram: Vec<HistogramBin>,
    pub trace_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub count: usize,
}

pub fn reduction_statistics(traces: &[ReductionTrace]) -> Result<ReductionStatistics, ReduceError> {
    let mut fractions: Vec<f64> = traces
        .iter()
        .filter(|t| t.initially_correct)
        .map(|t| t.removed_fraction)
        .collect();
    if fractions.is_empty() {
        return Err(ReduceError::NoEligibleTraces);
    }
    fractions.sort_by(|a, b| a.partial_cmp(b).expect("fractions are finite"));

    let n = fractions.len();
    let mean = fractions.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        fractions[n / 2]
    } else {
        (fractions[n / 2 - 1] + fractions[n / 2]) / 2.0
    };

    let mut histogram: Vec<HistogramBin> = (0..10)
        .map(|i| HistogramBin {
            bin_low: i as f64 / 10.0,
            bin_high: (i + 1) as f64 / 10.0,
            count: 0,
        })
        .collect();
    for &f in &fractions {
        let idx = ((f * 10.0).floor() as usize).min(9);
        histogram[idx].count += 1;
    }

    Ok(ReductionStatistics {
        mean_fraction: mean,
        median_fraction: median,
        histogram,
        trace_count: n,
    })
}

/// Write traces as JSONL, one trace per line.
pub fn write_traces<W: std::io::Write>(
    mut w: W,
    traces: &[ReductionTrace],
) -> std::io::Result<()> {
    for t in traces {
        let line = serde_json::to_string(t).expect("trace serializes");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Write the histogram as CSV: bin_low,bin_high,count.
pub fn write_histogram_csv<W: std::io::Write>(
    mut w: W,
    stats: &ReductionStatistics,
) -> std::io::Result<()> {
    writeln!(w, "bin_low,bin_high,count")?;
    for bin in &stats.histogram {
        writeln!(w, "{},{},{}", bin.bin_low, bin.bin_high, bin.count)?;
    }
    Ok(())
}
