//! Dataset loading, numeral masking, operation classification, and
//! cross-validation splits.
//!
//! Problems carry their question as a token sequence in which each numeral
//! has been replaced by a number token (`number0`, `number1`, ...) binding
//! the k-th extracted value. Records that already use number tokens (the
//! usual distribution format for MWP corpora) are accepted verbatim.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::equation::{answers_match, evaluate, EqToken, EquationError, PrefixEquation};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {id} (line {line}): {message}")]
    MalformedRecord {
        id: String,
        line: usize,
        message: String,
    },
    #[error("record {id} (line {line}): equation references number{index} but only {available} numbers are bound")]
    UnboundNumberToken {
        id: String,
        line: usize,
        index: usize,
        available: usize,
    },
    #[error("equation for record {id}: {source}")]
    Equation {
        id: String,
        #[source]
        source: EquationError,
    },
    #[error("equation has no operator")]
    DegenerateEquation,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cannot split {size} problems into {k} folds")]
    BadFoldCount { k: usize, size: usize },
    #[error("unsupported dataset format for {0}; expected .jsonl or .csv")]
    UnknownFormat(String),
}

/// Operation category of a problem's gold equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "ADD")]
    Add,
    #[serde(rename = "SUB")]
    Sub,
    #[serde(rename = "MUL")]
    Mul,
    #[serde(rename = "DIV")]
    Div,
    #[serde(rename = "MULTI")]
    Multi,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Add,
        Category::Sub,
        Category::Mul,
        Category::Div,
        Category::Multi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Add => "ADD",
            Category::Sub => "SUB",
            Category::Mul => "MUL",
            Category::Div => "DIV",
            Category::Multi => "MULTI",
        }
    }

    /// Lowercase form used in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Category::Add => "add",
            Category::Sub => "sub",
            Category::Mul => "mul",
            Category::Div => "div",
            Category::Multi => "multi",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Loader / pipeline annotations that keep a record usable while marking it
/// as unusual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemFlag {
    /// The stored answer disagrees with evaluating the gold equation.
    #[serde(rename = "answer_mismatch")]
    AnswerMismatch,
    /// A perturbation removed every token (the problem had no number tokens).
    #[serde(rename = "empty_after_perturbation")]
    EmptyAfterPerturbation,
}

/// A math word problem with masked numerals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathWordProblem {
    pub id: String,
    /// Surface tokens; numerals already masked to `numberk`.
    pub tokens: Vec<String>,
    /// Extracted values; position k binds token `numberk`.
    pub numbers: Vec<f64>,
    /// Gold equation in prefix notation.
    pub equation: PrefixEquation,
    pub answer: f64,
    pub category: Category,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<ProblemFlag>,
}

impl MathWordProblem {
    /// Question text: tokens joined with single spaces.
    pub fn question(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn is_flagged(&self, flag: ProblemFlag) -> bool {
        self.flags.contains(&flag)
    }
}

/// One fold of a k-fold cross-validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVSplit {
    pub fold_index: usize,
    pub train: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

/// True for `number0`, `number1`, ... (the NUMTOK token class).
pub fn is_number_token(token: &str) -> bool {
    token
        .strip_prefix("number")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// True when every character is punctuation (no letters or digits).
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| !c.is_alphanumeric())
}

/// Tokenize raw question text and replace each maximal numeric literal
/// (digits with an optional single decimal point) with `numberk`, k assigned
/// left to right.
///
/// Punctuation characters become separate tokens, with one exception: an
/// apostrophe directly followed by letters forms a clitic token (`'s`), which
/// matches how MWP corpora are distributed. A leading sign is never part of a
/// numeral. Text already containing number tokens passes through unchanged
/// because `number0` tokenizes as a single word.
pub fn mask_numbers(raw_text: &str) -> (Vec<String>, Vec<f64>) {
    let mut tokens = Vec::new();
    let mut numbers = Vec::new();
    for chunk in raw_text.split_whitespace() {
        tokenize_chunk(chunk, &mut tokens, &mut numbers);
    }
    (tokens, numbers)
}

fn tokenize_chunk(chunk: &str, tokens: &mut Vec<String>, numbers: &mut Vec<f64>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value: f64 = literal.parse().expect("digits parse as f64");
            tokens.push(format!("number{}", numbers.len()));
            numbers.push(value);
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else if c == '\'' && i + 1 < chars.len() && chars[i + 1].is_alphabetic() {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
}

/// Classify an arity-valid equation by its operators: exactly one operator
/// maps to that operator's category, two or more map to MULTI.
pub fn classify_operation(equation: &PrefixEquation) -> Result<Category, CorpusError> {
    let mut ops = equation.tokens().iter().filter_map(|t| match t {
        EqToken::Op(op) => Some(*op),
        _ => None,
    });
    let Some(first) = ops.next() else {
        return Err(CorpusError::DegenerateEquation);
    };
    if ops.next().is_some() {
        return Ok(Category::Multi);
    }
    Ok(match first {
        crate::equation::Operator::Add => Category::Add,
        crate::equation::Operator::Sub => Category::Sub,
        crate::equation::Operator::Mul => Category::Mul,
        crate::equation::Operator::Div => Category::Div,
    })
}

/// Fraction of problems per category. Every category is present in the
/// result; absent ones map to 0. Fractions sum to 1.
pub fn operation_distribution(
    dataset: &[MathWordProblem],
) -> Result<Vec<(Category, f64)>, CorpusError> {
    if dataset.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let total = dataset.len() as f64;
    Ok(Category::ALL
        .iter()
        .map(|&cat| {
            let count = dataset.iter().filter(|p| p.category == cat).count();
            (cat, count as f64 / total)
        })
        .collect())
}

/// Deterministic k-fold split. Fold sizes differ by at most one and the k
/// test sets partition the dataset.
pub fn split_cv_folds(
    dataset: &[MathWordProblem],
    k: usize,
    seed: u64,
) -> Result<Vec<CVSplit>, CorpusError> {
    if k < 2 || k > dataset.len() {
        return Err(CorpusError::BadFoldCount {
            k,
            size: dataset.len(),
        });
    }
    let mut ids: Vec<&str> = dataset.iter().map(|p| p.id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);

    let n = ids.len();
    let base = n / k;
    let extra = n % k;
    let mut splits = Vec::with_capacity(k);
    let mut offset = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < extra);
        let test: BTreeSet<String> = ids[offset..offset + size]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let train: BTreeSet<String> = ids
            .iter()
            .filter(|s| !test.contains(**s))
            .map(|s| s.to_string())
            .collect();
        splits.push(CVSplit {
            fold_index,
            train,
            test,
        });
        offset += size;
    }
    Ok(splits)
}

/// Select the problems named by an id set, preserving dataset order.
pub fn select_by_ids<'a>(
    dataset: &'a [MathWordProblem],
    ids: &BTreeSet<String>,
) -> Vec<&'a MathWordProblem> {
    dataset.iter().filter(|p| ids.contains(&p.id)).collect()
}

/// SHA-256 over a canonical rendering of the dataset, hex-encoded.
pub fn dataset_hash(dataset: &[MathWordProblem]) -> String {
    let mut hasher = Sha256::new();
    for p in dataset {
        hasher.update(p.id.as_bytes());
        hasher.update([0u8]);
        hasher.update(p.question().as_bytes());
        hasher.update([0u8]);
        hasher.update(p.equation.to_string().as_bytes());
        hasher.update([0u8]);
        hasher.update(p.answer.to_le_bytes());
        for n in &p.numbers {
            hasher.update(n.to_le_bytes());
        }
        hasher.update([0u8]);
    }
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Dataset file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Result<Self, CorpusError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Ok(DatasetFormat::Jsonl),
            Some("csv") => Ok(DatasetFormat::Csv),
            _ => Err(CorpusError::UnknownFormat(path.display().to_string())),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<String>,
    question: String,
    equation: String,
    answer: f64,
    #[serde(default)]
    numbers: Option<Vec<f64>>,
}

/// Outcome of loading a dataset: the problems plus non-fatal warnings.
#[derive(Debug)]
pub struct LoadedDataset {
    pub problems: Vec<MathWordProblem>,
    /// Human-readable warnings (flagged answer mismatches).
    pub warnings: Vec<String>,
}

/// Load a dataset file, masking numerals where the question still contains
/// raw digits. Record order is preserved.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LoadedDataset, CorpusError> {
    let file = std::fs::File::open(path)?;
    match format {
        DatasetFormat::Jsonl => load_jsonl(BufReader::new(file)),
        DatasetFormat::Csv => load_csv(file),
    }
}

/// Load with the format inferred from the file extension.
pub fn load_dataset_auto(path: &Path) -> Result<LoadedDataset, CorpusError> {
    load_dataset(path, DatasetFormat::from_path(path)?)
}

pub fn load_jsonl<R: BufRead>(reader: R) -> Result<LoadedDataset, CorpusError> {
    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::MalformedRecord {
                id: format!("line{line_no}"),
                line: line_no,
                message: e.to_string(),
            })?;
        problems.push(build_problem(raw, line_no, &mut warnings)?);
    }
    finish_load(problems, warnings)
}

pub fn load_csv<R: Read>(reader: R) -> Result<LoadedDataset, CorpusError> {
    let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let mut problems = Vec::new();
    let mut warnings = Vec::new();
    for (idx, row) in csv_reader.deserialize::<CsvRecord>().enumerate() {
        let line_no = idx + 2; // header occupies line 1
        let row = row.map_err(|e| CorpusError::MalformedRecord {
            id: format!("line{line_no}"),
            line: line_no,
            message: e.to_string(),
        })?;
        let numbers = match row.numbers.as_deref() {
            None | Some("") => None,
            Some(s) => Some(
                s.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|e| CorpusError::MalformedRecord {
                            id: row.id.clone().unwrap_or_else(|| format!("line{line_no}")),
                            line: line_no,
                            message: format!("bad number {t:?}: {e}"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let raw = RawRecord {
            id: row.id,
            question: row.question,
            equation: row.equation,
            answer: row.answer,
            numbers,
        };
        problems.push(build_problem(raw, line_no, &mut warnings)?);
    }
    finish_load(problems, warnings)
}

#[derive(Debug, Deserialize)]
struct CsvRecord {
    #[serde(default)]
    id: Option<String>,
    question: String,
    equation: String,
    answer: f64,
    #[serde(default)]
    numbers: Option<String>,
}

fn finish_load(
    problems: Vec<MathWordProblem>,
    warnings: Vec<String>,
) -> Result<LoadedDataset, CorpusError> {
    let mut seen = BTreeSet::new();
    for p in &problems {
        if !seen.insert(p.id.clone()) {
            return Err(CorpusError::MalformedRecord {
                id: p.id.clone(),
                line: 0,
                message: "duplicate problem id".into(),
            });
        }
    }
    Ok(LoadedDataset { problems, warnings })
}

fn build_problem(
    raw: RawRecord,
    line_no: usize,
    warnings: &mut Vec<String>,
) -> Result<MathWordProblem, CorpusError> {
    let id = raw.id.unwrap_or_else(|| format!("line{line_no}"));
    let equation =
        PrefixEquation::from_str(&raw.equation).map_err(|source| CorpusError::Equation {
            id: id.clone(),
            source,
        })?;
    let category = classify_operation(&equation).map_err(|_| CorpusError::MalformedRecord {
        id: id.clone(),
        line: line_no,
        message: "equation has no operator".into(),
    })?;

    let (tokens, masked_numbers) = mask_numbers(&raw.question);
    // Pre-masked records carry number tokens in the question and no raw
    // numerals for the masker to extract.
    let pre_masked = masked_numbers.is_empty() && tokens.iter().any(|t| is_number_token(t));
    let numbers = if pre_masked {
        // Question already uses number tokens; a numbers field binds them.
        match raw.numbers {
            Some(numbers) => numbers,
            None => {
                return Err(CorpusError::MalformedRecord {
                    id,
                    line: line_no,
                    message: "question uses number tokens but has no numbers field".into(),
                })
            }
        }
    } else {
        if let Some(provided) = &raw.numbers {
            if provided != &masked_numbers {
                return Err(CorpusError::MalformedRecord {
                    id,
                    line: line_no,
                    message: format!(
                        "numbers field {provided:?} disagrees with extracted {masked_numbers:?}"
                    ),
                });
            }
        }
        masked_numbers
    };

    validate_number_tokens(&id, line_no, &tokens, &numbers, pre_masked)?;

    if let Some(max) = equation.max_number_index() {
        if max >= numbers.len() {
            return Err(CorpusError::UnboundNumberToken {
                id,
                line: line_no,
                index: max,
                available: numbers.len(),
            });
        }
    }

    let mut flags = Vec::new();
    match evaluate(&equation, &numbers) {
        Ok(value) if answers_match(value, raw.answer) => {}
        Ok(value) => {
            warnings.push(format!(
                "record {id}: stored answer {} disagrees with equation value {value}; keeping record flagged",
                raw.answer
            ));
            flags.push(ProblemFlag::AnswerMismatch);
        }
        Err(e) => {
            warnings.push(format!(
                "record {id}: gold equation does not evaluate ({e}); keeping record flagged"
            ));
            flags.push(ProblemFlag::AnswerMismatch);
        }
    }

    Ok(MathWordProblem {
        id,
        tokens,
        numbers,
        equation,
        answer: raw.answer,
        category,
        flags,
    })
}

/// Number-token indices must appear in first-appearance order starting at 0.
/// Masked questions bind every number; pre-masked records may leave trailing
/// numbers unreferenced (this keeps flagged-empty perturbation outputs
/// loadable).
fn validate_number_tokens(
    id: &str,
    line_no: usize,
    tokens: &[String],
    numbers: &[f64],
    pre_masked: bool,
) -> Result<(), CorpusError> {
    let mut next = 0usize;
    for t in tokens {
        if let Some(rest) = t.strip_prefix("number") {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let k: usize = rest.parse().unwrap_or(usize::MAX);
                if k == next {
                    next += 1;
                } else if k > next {
                    return Err(CorpusError::MalformedRecord {
                        id: id.to_string(),
                        line: line_no,
                        message: format!(
                            "number tokens out of order: number{k} appears before number{next}"
                        ),
                    });
                }
                // k < next: a repeated reference is fine.
                if k >= numbers.len() {
                    return Err(CorpusError::UnboundNumberToken {
                        id: id.to_string(),
                        line: line_no,
                        index: k,
                        available: numbers.len(),
                    });
                }
            }
        }
    }
    if !pre_masked && next != numbers.len() {
        return Err(CorpusError::MalformedRecord {
            id: id.to_string(),
            line: line_no,
            message: "masked question does not bind every extracted number".into(),
        });
    }
    Ok(())
}

/// Serialize problems as JSONL in the dataset record schema.
pub fn write_jsonl<W: std::io::Write>(
    mut writer: W,
    problems: &[MathWordProblem],
) -> Result<(), CorpusError> {
    for p in problems {
        let mut record = serde_json::json!({
            "id": p.id,
            "question": p.question(),
            "equation": p.equation.to_string(),
            "answer": p.answer,
            "numbers": p.numbers,
        });
        if !p.flags.is_empty() {
            record["flags"] = serde_json::to_value(&p.flags).expect("flags serialize");
        }
        writeln!(writer, "{record}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn problem(id: &str, question: &str, equation: &str, answer: f64) -> MathWordProblem {
        let (tokens, numbers) = mask_numbers(question);
        let equation: PrefixEquation = equation.parse().unwrap();
        let category = classify_operation(&equation).unwrap();
        MathWordProblem {
            id: id.to_string(),
            tokens,
            numbers,
            equation,
            answer,
            category,
            flags: Vec::new(),
        }
    }

    #[test]
    fn mask_numbers_basic() {
        let (tokens, numbers) = mask_numbers("Tommy had 5 balloons .");
        assert_eq!(tokens, vec!["Tommy", "had", "number0", "balloons", "."]);
        assert_eq!(numbers, vec![5.0]);
    }

    #[test]
    fn mask_numbers_decimal() {
        let (tokens, numbers) = mask_numbers("costs 12.5 cents");
        assert_eq!(tokens, vec!["costs", "number0", "cents"]);
        assert_eq!(numbers, vec![12.5]);
    }

    #[test]
    fn mask_numbers_no_digits() {
        let (tokens, numbers) = mask_numbers("no digits here .");
        assert_eq!(tokens, vec!["no", "digits", "here", "."]);
        assert!(numbers.is_empty());
    }

    #[test]
    fn mask_numbers_splits_punctuation() {
        let (tokens, numbers) = mask_numbers("Tom ate 2.");
        assert_eq!(tokens, vec!["Tom", "ate", "number0", "."]);
        assert_eq!(numbers, vec![2.0]);

        let (tokens, _) = mask_numbers("Emily's cards, now?");
        assert_eq!(tokens, vec!["Emily", "'s", "cards", ",", "now", "?"]);
    }

    #[test]
    fn mask_numbers_sign_stays_separate() {
        let (tokens, numbers) = mask_numbers("dropped -3 degrees");
        assert_eq!(tokens, vec!["dropped", "-", "number0", "degrees"]);
        assert_eq!(numbers, vec![3.0]);
    }

    #[test]
    fn mask_numbers_repeated_literal_gets_fresh_index() {
        let (tokens, numbers) = mask_numbers("5 plus 5");
        assert_eq!(tokens, vec!["number0", "plus", "number1"]);
        assert_eq!(numbers, vec![5.0, 5.0]);
    }

    #[test]
    fn mask_preserves_existing_number_tokens() {
        let (tokens, numbers) = mask_numbers("Tom had number0 apples .");
        assert_eq!(tokens, vec!["Tom", "had", "number0", "apples", "."]);
        assert!(numbers.is_empty());
    }

    #[test]
    fn masking_round_trip() {
        // Substituting numbers[k] back for each numberk token reproduces the
        // original numeral sequence in order.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mut text = String::new();
            let mut expected = Vec::new();
            for _ in 0..rng.gen_range(1..8) {
                if rng.gen_bool(0.5) {
                    let v: u32 = rng.gen_range(0..500);
                    expected.push(v as f64);
                    text.push_str(&v.to_string());
                } else {
                    text.push_str(["cat", "ran", "fast", "."][rng.gen_range(0..4)]);
                }
                text.push(' ');
            }
            let (tokens, numbers) = mask_numbers(&text);
            assert_eq!(numbers, expected);
            let substituted: Vec<f64> = tokens
                .iter()
                .filter(|t| is_number_token(t))
                .map(|t| numbers[t[6..].parse::<usize>().unwrap()])
                .collect();
            assert_eq!(substituted, expected);
        }
    }

    #[test]
    fn classify_by_operator_count() {
        let sub: PrefixEquation = "- number1 number0".parse().unwrap();
        assert_eq!(classify_operation(&sub).unwrap(), Category::Sub);
        let multi: PrefixEquation = "+ number0 * number1 number2".parse().unwrap();
        assert_eq!(classify_operation(&multi).unwrap(), Category::Multi);
        let add: PrefixEquation = "+ number0 number1".parse().unwrap();
        assert_eq!(classify_operation(&add).unwrap(), Category::Add);
        // repeated same-type operators are still MULTI
        let same: PrefixEquation = "+ number0 + number1 number2".parse().unwrap();
        assert_eq!(classify_operation(&same).unwrap(), Category::Multi);
        let degenerate: PrefixEquation = "number0".parse().unwrap();
        assert!(matches!(
            classify_operation(&degenerate),
            Err(CorpusError::DegenerateEquation)
        ));
    }

    #[test]
    fn distribution_symmetry_case() {
        let dataset = vec![
            problem("a", "Tom has 1 and 2", "+ number0 number1", 3.0),
            problem("b", "Tom has 3 and 4", "+ number0 number1", 7.0),
            problem("c", "Tom has 5 less 1", "- number0 number1", 4.0),
            problem("d", "Tom has 9 less 2", "- number0 number1", 7.0),
        ];
        let dist = operation_distribution(&dataset).unwrap();
        let get = |cat| dist.iter().find(|(c, _)| *c == cat).unwrap().1;
        assert_eq!(get(Category::Add), 0.5);
        assert_eq!(get(Category::Sub), 0.5);
        assert_eq!(get(Category::Mul), 0.0);
        assert_eq!(get(Category::Div), 0.0);
        assert_eq!(get(Category::Multi), 0.0);
        let sum: f64 = dist.iter().map(|(_, f)| f).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(matches!(
            operation_distribution(&[]),
            Err(CorpusError::EmptyDataset)
        ));
    }

    #[test]
    fn distribution_matches_hand_count_on_random_fixture() {
        // Independent oracle: count category labels directly.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let equations = [
            "+ number0 number1",
            "- number0 number1",
            "* number0 number1",
            "/ number0 number1",
            "+ number0 * number0 number1",
        ];
        let dataset: Vec<MathWordProblem> = (0..10)
            .map(|i| {
                let eq = equations[rng.gen_range(0..equations.len())];
                let equation: PrefixEquation = eq.parse().unwrap();
                let numbers = vec![6.0, 2.0];
                let answer = evaluate(&equation, &numbers).unwrap();
                problem(&format!("p{i}"), "a 6 b 2", eq, answer)
            })
            .collect();
        let dist = operation_distribution(&dataset).unwrap();
        for cat in Category::ALL {
            let hand = dataset.iter().filter(|p| p.category == cat).count() as f64 / 10.0;
            let got = dist.iter().find(|(c, _)| *c == cat).unwrap().1;
            assert_eq!(got, hand, "{cat}");
        }
    }

    fn tiny_dataset(n: usize) -> Vec<MathWordProblem> {
        (0..n)
            .map(|i| problem(&format!("p{i}"), "a 1 b 2", "+ number0 number1", 3.0))
            .collect()
    }

    #[test]
    fn cv_folds_partition_and_balance() {
        let dataset = tiny_dataset(10);
        let splits = split_cv_folds(&dataset, 5, 1).unwrap();
        assert_eq!(splits.len(), 5);
        let mut seen = BTreeSet::new();
        for s in &splits {
            assert_eq!(s.test.len(), 2);
            assert!(s.train.is_disjoint(&s.test));
            assert_eq!(s.train.len() + s.test.len(), 10);
            for id in &s.test {
                assert!(seen.insert(id.clone()), "{id} in two test sets");
            }
        }
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn cv_folds_deterministic() {
        let dataset = tiny_dataset(10);
        assert_eq!(
            split_cv_folds(&dataset, 5, 1).unwrap(),
            split_cv_folds(&dataset, 5, 1).unwrap()
        );
        assert_ne!(
            split_cv_folds(&dataset, 5, 1).unwrap(),
            split_cv_folds(&dataset, 5, 2).unwrap()
        );
    }

    #[test]
    fn cv_folds_uneven_sizes() {
        let dataset = tiny_dataset(11);
        let splits = split_cv_folds(&dataset, 5, 3).unwrap();
        let mut sizes: Vec<usize> = splits.iter().map(|s| s.test.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn cv_folds_bad_k() {
        let dataset = tiny_dataset(3);
        assert!(matches!(
            split_cv_folds(&dataset, 5, 1),
            Err(CorpusError::BadFoldCount { .. })
        ));
        assert!(matches!(
            split_cv_folds(&dataset, 1, 1),
            Err(CorpusError::BadFoldCount { .. })
        ));
    }

    #[test]
    fn load_jsonl_masks_and_preserves_order() {
        let data = concat!(
            r#"{"id": "a", "question": "Tom had 5 apples and ate 2 .", "equation": "- number0 number1", "answer": 3.0}"#,
            "\n",
            r#"{"id": "b", "question": "Sue had 4 pens and got 4 more .", "equation": "+ number0 number1", "answer": 8.0}"#,
            "\n",
            r#"{"id": "c", "question": "A box holds 3 rows of 6 .", "equation": "* number0 number1", "answer": 18.0}"#,
            "\n",
        );
        let loaded = load_jsonl(data.as_bytes()).unwrap();
        assert_eq!(loaded.problems.len(), 3);
        assert!(loaded.warnings.is_empty());
        let ids: Vec<&str> = loaded.problems.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
        let first = &loaded.problems[0];
        assert_eq!(
            first.tokens,
            vec!["Tom", "had", "number0", "apples", "and", "ate", "number1", "."]
        );
        assert_eq!(first.numbers, vec![5.0, 2.0]);
        assert_eq!(first.category, Category::Sub);
    }

    #[test]
    fn load_jsonl_unbound_number_token() {
        let data = r#"{"id": "a", "question": "Tom had 5 apples and ate 2 .", "equation": "- number2 number0", "answer": 3.0}"#;
        let err = load_jsonl(data.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::UnboundNumberToken { index: 2, .. }), "{err}");
    }

    #[test]
    fn load_jsonl_malformed_reports_line() {
        let data = "{\"id\": \"a\", \"question\": \"Tom had 5 apples and ate 2 .\", \"equation\": \"- number0 number1\", \"answer\": 3.0}\nnot json\n";
        let err = load_jsonl(data.as_bytes()).unwrap_err();
        match err {
            CorpusError::MalformedRecord { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn load_jsonl_answer_mismatch_flags_record() {
        let data = r#"{"id": "a", "question": "Tom had 5 apples and ate 2 .", "equation": "- number0 number1", "answer": 4.0}"#;
        let loaded = load_jsonl(data.as_bytes()).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.problems[0].is_flagged(ProblemFlag::AnswerMismatch));
    }

    #[test]
    fn load_jsonl_pre_masked_verbatim() {
        let data = r#"{"id": "a", "question": "Virginia starts with number0 eggs . Amy takes number1 away .", "equation": "- number0 number1", "answer": 3.0, "numbers": [5.0, 2.0]}"#;
        let loaded = load_jsonl(data.as_bytes()).unwrap();
        let p = &loaded.problems[0];
        assert_eq!(p.numbers, vec![5.0, 2.0]);
        assert_eq!(p.tokens[3], "number0");
    }

    #[test]
    fn load_jsonl_pre_masked_requires_numbers() {
        let data = r#"{"id": "a", "question": "Tom has number0 apples .", "equation": "+ number0 0", "answer": 5.0}"#;
        assert!(load_jsonl(data.as_bytes()).is_err());
    }

    #[test]
    fn load_jsonl_duplicate_ids_rejected() {
        let data = concat!(
            r#"{"id": "a", "question": "Tom had 5 apples and ate 2 .", "equation": "- number0 number1", "answer": 3.0}"#,
            "\n",
            r#"{"id": "a", "question": "Sue had 4 pens and got 4 more .", "equation": "+ number0 number1", "answer": 8.0}"#,
            "\n",
        );
        assert!(load_jsonl(data.as_bytes()).is_err());
    }

    #[test]
    fn load_csv_matches_jsonl() {
        let csv_data = "id,question,equation,answer,numbers\n\
                        a,Tom had 5 apples and ate 2 .,- number0 number1,3.0,\n\
                        b,Sue starts with number0 pens .,+ number0 0,4.0,4\n";
        let loaded = load_csv(csv_data.as_bytes()).unwrap();
        assert_eq!(loaded.problems.len(), 2);
        assert_eq!(loaded.problems[0].numbers, vec![5.0, 2.0]);
        assert_eq!(loaded.problems[1].numbers, vec![4.0]);
    }

    #[test]
    fn jsonl_write_read_round_trip() {
        let dataset = vec![
            problem("a", "Tom had 5 apples and ate 2 .", "- number0 number1", 3.0),
            problem("b", "Sue had 4.5 dollars .", "+ number0 0", 4.5),
        ];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &dataset).unwrap();
        let reloaded = load_jsonl(buf.as_slice()).unwrap();
        assert_eq!(reloaded.problems.len(), 2);
        assert_eq!(reloaded.problems[0].tokens, dataset[0].tokens);
        assert_eq!(reloaded.problems[1].numbers, dataset[1].numbers);
        assert_eq!(dataset_hash(&reloaded.problems), dataset_hash(&dataset));
    }

    #[test]
    fn dataset_hash_is_order_sensitive() {
        let a = problem("a", "Tom has 1 and 2", "+ number0 number1", 3.0);
        let b = problem("b", "Tom has 3 and 4", "+ number0 number1", 7.0);
        assert_ne!(
            dataset_hash(&[a.clone(), b.clone()]),
            dataset_hash(&[b, a])
        );
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // masking never panics and always yields contiguous number-token
            // indices bound to the numerals in order
            #[test]
            fn masking_invariants_on_arbitrary_text(
                text in "[a-zA-Z0-9 .,?!'$-]{0,60}"
            ) {
                prop_assume!(!text.contains("number"));
                let (tokens, numbers) = mask_numbers(&text);
                prop_assert!(tokens.iter().all(|t| !t.is_empty()));
                let mut next = 0usize;
                for t in &tokens {
                    if is_number_token(t) {
                        let k: usize = t[6..].parse().unwrap();
                        prop_assert_eq!(k, next);
                        next += 1;
                    }
                }
                prop_assert_eq!(next, numbers.len());
            }
        }
    }
}
