//! Experiment orchestration: per-fold training on original text, evaluation
//! on the original and perturbed test splits, and report emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    dataset_hash, operation_distribution, select_by_ids, split_cv_folds, Category, CorpusError,
    MathWordProblem,
};
use crate::equation::{answers_match, evaluate_token_strings};
use crate::perturb::{apply_perturbation, PerturbationSpec};
use crate::solver::{train, Predictor, SolverConfig, SolverError};
use crate::tagger::TaggerBackend;

pub const ORIGINAL_VARIANT: &str = "original";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("fold {fold}: {source}")]
    Training {
        fold: usize,
        #[source]
        source: SolverError,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// How a suite run is configured; flags and config files both land here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub solver: SolverConfig,
    pub folds: usize,
    pub seed: u64,
    /// Subset of variant names to run; `None` means all 13.
    pub variants: Option<Vec<String>>,
    /// Worker threads for fold-level parallelism; 1 keeps everything serial.
    pub jobs: usize,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            folds: 5,
            seed: 42,
            variants: None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpAccuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Accuracy summary for one variant (or the original dataset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    /// `mean_accuracy(original) - mean_accuracy(this)`; 0 for the original.
    pub decrease: f64,
    /// Pooled over all folds' test splits.
    pub per_operation: BTreeMap<Category, OpAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub solver: SolverConfig,
    pub folds: usize,
    pub seed: u64,
    pub dataset_hash: String,
    pub problem_count: usize,
    pub tagger_backend: String,
}

/// The full experiment result. Serializes losslessly to JSON; wall-clock
/// times stay out so identical runs produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    /// "original" first, then the variants in suite order.
    pub variants: Vec<VariantReport>,
    pub operation_distribution: Vec<(Category, f64)>,
}

/// Answer accuracy of a predictor over a dataset. Predictions that fail to
/// parse or evaluate count as incorrect.
pub fn evaluate_accuracy<P: Predictor + ?Sized>(model: &P, dataset: &[MathWordProblem]) -> f64 {
    if dataset.is_empty() {
        return 0.0;
    }
    let correct = dataset
        .iter()
        .filter(|p| prediction_correct(model, p))
        .count();
    correct as f64 / dataset.len() as f64
}

fn prediction_correct<P: Predictor + ?Sized>(model: &P, problem: &MathWordProblem) -> bool {
    let prediction = model.predict_tokens(&problem.tokens);
    match evaluate_token_strings(&prediction.tokens, &problem.numbers) {
        Ok(value) => answers_match(value, problem.answer),
        Err(_) => false,
    }
}

/// Accuracy restricted to each category present in the dataset.
pub fn per_operation_accuracy<P: Predictor + ?Sized>(
    model: &P,
    dataset: &[MathWordProblem],
) -> BTreeMap<Category, f64> {
    per_operation_counts(model, dataset)
        .into_iter()
        .map(|(cat, acc)| (cat, acc.accuracy))
        .collect()
}

fn per_operation_counts<P: Predictor + ?Sized>(
    model: &P,
    dataset: &[MathWordProblem],
) -> BTreeMap<Category, OpAccuracy> {
    let mut out: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
    for p in dataset {
        let entry = out.entry(p.category).or_insert((0, 0));
        entry.1 += 1;
        entry.0 += usize::from(prediction_correct(model, p));
    }
    out.into_iter()
        .map(|(cat, (correct, total))| {
            (
                cat,
                OpAccuracy {
                    correct,
                    total,
                    accuracy: correct as f64 / total as f64,
                },
            )
        })
        .collect()
}

struct FoldResult {
    /// Per variant: fold accuracy and per-category counts.
    rows: Vec<(String, f64, BTreeMap<Category, OpAccuracy>)>,
}

/// Train per fold on original text, evaluate on the fold's original test
/// split and every perturbed copy of it, and aggregate.
pub fn run_suite(
    dataset: &[MathWordProblem],
    backend: &dyn TaggerBackend,
    options: &SuiteOptions,
) -> Result<ExperimentReport, HarnessError> {
    let splits = split_cv_folds(dataset, options.folds, options.seed)?;
    let specs = resolve_variants(options.variants.as_deref())?;

    let run_fold = |split: &crate::corpus::CVSplit| -> Result<FoldResult, HarnessError> {
        let train_set: Vec<MathWordProblem> = select_by_ids(dataset, &split.train)
            .into_iter()
            .cloned()
            .collect();
        let test_set: Vec<MathWordProblem> = select_by_ids(dataset, &split.test)
            .into_iter()
            .cloned()
            .collect();
        let solver_config = SolverConfig {
            seed: options.solver.seed.wrapping_add(split.fold_index as u64),
            ..options.solver.clone()
        };
        let mut model = train(&train_set, &solver_config).map_err(|source| {
            HarnessError::Training {
                fold: split.fold_index,
                source,
            }
        })?;
        model.metadata.fold = Some(split.fold_index);

        let mut rows = Vec::with_capacity(specs.len() + 1);
        rows.push((
            ORIGINAL_VARIANT.to_string(),
            evaluate_accuracy(&model, &test_set),
            per_operation_counts(&model, &test_set),
        ));
        for spec in &specs {
            let perturbed: Vec<MathWordProblem> = test_set
                .iter()
                .map(|p| apply_perturbation(p, spec, backend))
                .collect();
            rows.push((
                spec.name.clone(),
                evaluate_accuracy(&model, &perturbed),
                per_operation_counts(&model, &perturbed),
            ));
        }
        Ok(FoldResult { rows })
    };

    let fold_results: Vec<FoldResult> = if options.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.jobs)
            .build()
            .expect("worker pool builds");
        pool.install(|| {
            use rayon::prelude::*;
            splits.par_iter().map(run_fold).collect::<Result<_, _>>()
        })?
    } else {
        splits
            .iter()
            .map(run_fold)
            .collect::<Result<_, _>>()?
    };

    // aggregate in variant order
    let variant_names: Vec<String> = std::iter::once(ORIGINAL_VARIANT.to_string())
        .chain(specs.iter().map(|s| s.name.clone()))
        .collect();
    let mut variants = Vec::with_capacity(variant_names.len());
    for (vi, name) in variant_names.iter().enumerate() {
        let fold_accuracies: Vec<f64> = fold_results.iter().map(|f| f.rows[vi].1).collect();
        let mean_accuracy = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
        let mut per_operation: BTreeMap<Category, (usize, usize)> = BTreeMap::new();
        for fold in &fold_results {
            for (cat, acc) in &fold.rows[vi].2 {
                let e = per_operation.entry(*cat).or_insert((0, 0));
                e.0 += acc.correct;
                e.1 += acc.total;
            }
        }
        variants.push(VariantReport {
            name: name.clone(),
            fold_accuracies,
            mean_accuracy,
            decrease: 0.0,
            per_operation: per_operation
                .into_iter()
                .map(|(cat, (correct, total))| {
                    (
                        cat,
                        OpAccuracy {
                            correct,
                            total,
                            accuracy: correct as f64 / total as f64,
                        },
                    )
                })
                .collect(),
        });
    }
    let original_mean = variants[0].mean_accuracy;
    for v in variants.iter_mut().skip(1) {
        v.decrease = original_mean - v.mean_accuracy;
    }

    Ok(ExperimentReport {
        metadata: ReportMetadata {
            solver: options.solver.clone(),
            folds: options.folds,
            seed: options.seed,
            dataset_hash: dataset_hash(dataset),
            problem_count: dataset.len(),
            tagger_backend: backend.name().to_string(),
        },
        variants,
        operation_distribution: operation_distribution(dataset)?,
    })
}

fn resolve_variants(names: Option<&[String]>) -> Result<Vec<PerturbationSpec>, HarnessError> {
    match names {
        None => Ok(PerturbationSpec::standard_suite()),
        Some(names) => names
            .iter()
            .map(|n| {
                PerturbationSpec::by_name(n).ok_or_else(|| HarnessError::UnknownVariant(n.clone()))
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Markdown, ReportFormat::Csv];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "json" => Some(Self::Json),
            "markdown" | "md" => Some(Self::Markdown),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

/// Write report files into `dir`; returns the paths written.
/// JSON is lossless; markdown mirrors the accuracy/decrease table layout;
/// CSV covers per-operation bars, the operation distribution, and per-fold
/// variant accuracies.
pub fn emit_report(
    report: &ExperimentReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    if formats.contains(&ReportFormat::Json) {
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
        written.push(path);
    }

    if formats.contains(&ReportFormat::Markdown) {
        let path = dir.join("report.md");
        std::fs::write(&path, render_markdown(report))?;
        written.push(path);
    }

    if formats.contains(&ReportFormat::Csv) {
        let path = dir.join("per_op_accuracy.csv");
        let mut body = String::from("variant,category,correct,total,accuracy\n");
        for v in &report.variants {
            for (cat, acc) in &v.per_operation {
                body.push_str(&format!(
                    "{},{},{},{},{}\n",
                    v.name, cat, acc.correct, acc.total, acc.accuracy
                ));
            }
        }
        std::fs::write(&path, body)?;
        written.push(path);

        let path = dir.join("op_distribution.csv");
        let mut body = String::from("category,fraction\n");
        for (cat, fraction) in &report.operation_distribution {
            body.push_str(&format!("{cat},{fraction}\n"));
        }
        std::fs::write(&path, body)?;
        written.push(path);

        let path = dir.join("variant_accuracy.csv");
        let mut body = String::from("variant,fold,accuracy\n");
        for v in &report.variants {
            for (fold, acc) in v.fold_accuracies.iter().enumerate() {
                body.push_str(&format!("{},{},{}\n", v.name, fold, acc));
            }
        }
        std::fs::write(&path, body)?;
        written.push(path);
    }

    Ok(written)
}

fn render_markdown(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str("| Perturbation | CV Accuracy | Decrease |\n");
    out.push_str("|---|---|---|\n");
    for v in &report.variants {
        let decrease = if v.name == ORIGINAL_VARIANT {
            "-".to_string()
        } else {
            format!("{:.3}", v.decrease)
        };
        out.push_str(&format!(
            "| {} | {:.3} | {} |\n",
            v.name.replace('_', " "),
            v.mean_accuracy,
            decrease
        ));
    }
    out
}
