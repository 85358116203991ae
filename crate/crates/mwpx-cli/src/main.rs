//! `mwpx`: train the reference solver, build perturbed dataset variants, run
//! the cross-validation suite, reduce inputs, and emit frequency and
//! distribution reports.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mwpx_core::corpus::{
    dataset_hash, load_dataset_auto, operation_distribution, write_jsonl, MathWordProblem,
};
use mwpx_core::equation::evaluate_token_strings;
use mwpx_core::freq::{top_words_report, write_category_csv};
use mwpx_core::harness::{emit_report, run_suite, ReportFormat, SuiteOptions};
use mwpx_core::perturb::{apply_perturbation, variant_file_name, PerturbationSpec};
use mwpx_core::reduce::{reduce_input, reduction_statistics, write_histogram_csv, write_traces};
use mwpx_core::solver::{io as model_io, train, Predictor, SolverConfig};
use mwpx_core::tagger::LexiconTagger;

#[derive(Parser)]
#[command(name = "mwpx", version, about = "Math-word-problem solver workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the solver on a dataset and write a model directory.
    Train(TrainArgs),
    /// Predict an equation for a question (or every problem in a dataset).
    Predict(PredictArgs),
    /// Write perturbed dataset variants as JSONL.
    Perturb(PerturbArgs),
    /// Run the full cross-validation perturbation suite and emit reports.
    Suite(SuiteArgs),
    /// Run input reduction over a dataset and emit traces plus a histogram.
    Reduce(ReduceArgs),
    /// Per-operation word document frequency reports.
    Freq(FreqArgs),
    /// Operation-type distribution of a dataset.
    Distribution(DistributionArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file (.jsonl or .csv).
    #[arg(long)]
    data: PathBuf,
    /// Solver config JSON; defaults apply for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override (also via MWPX_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Model output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model directory.
    #[arg(long)]
    model: PathBuf,
    /// Dataset to predict over (writes predictions.jsonl to --out or stdout).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory for batch predictions.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format: json or text.
    #[arg(long, default_value = "text")]
    format: String,
    /// A single question; numerals are masked automatically.
    question: Option<String>,
}

#[derive(Args)]
struct PerturbArgs {
    /// Dataset file (.jsonl or .csv).
    #[arg(long)]
    data: PathBuf,
    /// Variant name; omit to write all 13.
    #[arg(long)]
    variant: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    /// Dataset file; may also come from the config file.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Suite config JSON (dataset path, solver config, folds, seed, variants,
    /// output_dir). Flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for fold-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    /// Restrict emitted report formats (json, markdown, csv). Default: all.
    #[arg(long)]
    format: Vec<String>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReduceArgs {
    /// Trained model directory.
    #[arg(long)]
    model: PathBuf,
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads for per-problem parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct FreqArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Top-list size before the shared-word filter.
    #[arg(long, default_value_t = 50)]
    top: usize,
}

#[derive(Args)]
struct DistributionArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for op_distribution.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Per-file suite configuration; every field optional so flags can fill in.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SuiteFileConfig {
    dataset: Option<PathBuf>,
    solver: Option<SolverConfig>,
    folds: Option<usize>,
    seed: Option<u64>,
    variants: Option<Vec<String>>,
    jobs: Option<usize>,
    output_dir: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Perturb(args) => cmd_perturb(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Reduce(args) => cmd_reduce(args),
        Command::Freq(args) => cmd_freq(args),
        Command::Distribution(args) => cmd_distribution(args),
    }
}

/// Seed precedence: flag, then MWPX_SEED, then the fallback.
fn resolve_seed(flag: Option<u64>, fallback: u64) -> u64 {
    flag.or_else(|| {
        std::env::var("MWPX_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(fallback)
}

fn load_problems(path: &Path) -> Result<Vec<MathWordProblem>> {
    let loaded = load_dataset_auto(path)
        .with_context(|| format!("loading dataset {}", path.display()))?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    log::info!(
        "dataset {}: {} problems, hash {}",
        path.display(),
        loaded.problems.len(),
        dataset_hash(&loaded.problems)
    );
    Ok(loaded.problems)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let problems = load_problems(&args.data)?;
    let mut config: SolverConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing solver config {}", path.display()))?,
        None => SolverConfig::default(),
    };
    config.seed = resolve_seed(args.seed, config.seed);
    log::info!("resolved solver config: {config:?}");

    let model = train(&problems, &config)?;
    model_io::save_model(&model, &args.out)?;
    let history = &model.metadata.loss_history;
    log::info!(
        "trained {} epochs (loss {:.4} -> {:.4}), model saved to {}",
        history.len(),
        history.first().copied().unwrap_or(f64::NAN),
        history.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let model = model_io::load_model(&args.model)?;
    log::info!(
        "model loaded from {} (seed {}, dataset hash {})",
        args.model.display(),
        model.metadata.seed,
        model.metadata.dataset_hash
    );

    match (&args.question, &args.data) {
        (Some(question), None) => {
            let (tokens, numbers) = mwpx_core::corpus::mask_numbers(question);
            let prediction = model.predict_tokens(&tokens);
            let answer = evaluate_token_strings(&prediction.tokens, &numbers).ok();
            if args.format == "json" {
                let record = serde_json::json!({
                    "question": tokens.join(" "),
                    "equation": prediction.tokens.join(" "),
                    "answer": answer,
                    "confidence": prediction.confidence,
                });
                println!("{record}");
            } else {
                println!("equation:   {}", prediction.tokens.join(" "));
                match answer {
                    Some(a) => println!("answer:     {a}"),
                    None => println!("answer:     (equation does not evaluate)"),
                }
                println!("confidence: {:.6}", prediction.confidence);
            }
            Ok(())
        }
        (None, Some(data)) => {
            let problems = load_problems(data)?;
            let mut out: Box<dyn std::io::Write> = match &args.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    Box::new(std::fs::File::create(dir.join("predictions.jsonl"))?)
                }
                None => Box::new(std::io::stdout()),
            };
            for p in &problems {
                let prediction = model.predict_tokens(&p.tokens);
                let answer = evaluate_token_strings(&prediction.tokens, &p.numbers).ok();
                let correct = answer
                    .map(|a| mwpx_core::equation::answers_match(a, p.answer))
                    .unwrap_or(false);
                let record = serde_json::json!({
                    "id": p.id,
                    "equation": prediction.tokens.join(" "),
                    "answer": answer,
                    "correct": correct,
                    "confidence": prediction.confidence,
                });
                writeln!(out, "{record}")?;
            }
            Ok(())
        }
        _ => bail!("predict needs exactly one of: a QUESTION argument or --data"),
    }
}

fn cmd_perturb(args: PerturbArgs) -> Result<()> {
    let problems = load_problems(&args.data)?;
    let backend = LexiconTagger::default();
    let stem = args
        .data
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    let specs: Vec<PerturbationSpec> = match &args.variant {
        Some(name) => {
            vec![PerturbationSpec::by_name(name)
                .with_context(|| format!("unknown variant {name:?}"))?]
        }
        None => PerturbationSpec::standard_suite(),
    };
    std::fs::create_dir_all(&args.out)?;
    for spec in specs {
        let variant: Vec<MathWordProblem> = problems
            .iter()
            .map(|p| apply_perturbation(p, &spec, &backend))
            .collect();
        let path = args.out.join(variant_file_name(&stem, &spec.name));
        let file = std::fs::File::create(&path)?;
        write_jsonl(std::io::BufWriter::new(file), &variant)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_suite(args: SuiteArgs) -> Result<()> {
    let file_config: SuiteFileConfig = match &args.config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)
            .with_context(|| format!("parsing suite config {}", path.display()))?,
        None => SuiteFileConfig::default(),
    };
    let data_path = args
        .data
        .clone()
        .or(file_config.dataset)
        .context("no dataset: pass --data or set \"dataset\" in the config file")?;
    let out_dir = args
        .out
        .clone()
        .or(file_config.output_dir)
        .context("no output directory: pass --out or set \"output_dir\" in the config file")?;

    let mut options = SuiteOptions {
        solver: file_config.solver.unwrap_or_default(),
        folds: args.folds.or(file_config.folds).unwrap_or(5),
        seed: resolve_seed(args.seed, file_config.seed.unwrap_or(42)),
        variants: file_config.variants,
        jobs: args.jobs.or(file_config.jobs).unwrap_or(1),
    };
    options.solver.seed = options.seed;

    let formats: Vec<ReportFormat> = if args.format.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        args.format
            .iter()
            .map(|f| ReportFormat::parse(f).with_context(|| format!("unknown format {f:?}")))
            .collect::<Result<_>>()?
    };

    let problems = load_problems(&data_path)?;
    log::info!("resolved suite options: {options:?}");

    let started = std::time::SystemTime::now();
    let t0 = std::time::Instant::now();
    let report = run_suite(&problems, &LexiconTagger::default(), &options)?;
    let elapsed = t0.elapsed();

    let written = emit_report(&report, &out_dir, &formats)?;
    for path in &written {
        log::info!("wrote {}", path.display());
    }

    // wall-clock data stays out of the report so identical runs produce
    // byte-identical JSON; the sidecar log carries it instead
    let unix_ms = |t: std::time::SystemTime| {
        t.duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0)
    };
    std::fs::write(
        out_dir.join("run.log"),
        format!(
            "started_unix_ms={}\nelapsed_ms={}\ndataset={}\n",
            unix_ms(started),
            elapsed.as_millis(),
            data_path.display()
        ),
    )?;
    Ok(())
}

fn cmd_reduce(args: ReduceArgs) -> Result<()> {
    let model = model_io::load_model(&args.model)?;
    let problems = load_problems(&args.data)?;
    std::fs::create_dir_all(&args.out)?;

    let traces: Vec<mwpx_core::reduce::ReductionTrace> = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .context("building worker pool")?;
        pool.install(|| {
            use rayon::prelude::*;
            problems.par_iter().map(|p| reduce_input(&model, p)).collect()
        })
    } else {
        problems.iter().map(|p| reduce_input(&model, p)).collect()
    };

    let traces_path = args.out.join("traces.jsonl");
    write_traces(std::fs::File::create(&traces_path)?, &traces)?;
    log::info!("wrote {}", traces_path.display());

    match reduction_statistics(&traces) {
        Ok(stats) => {
            let hist_path = args.out.join("histogram.csv");
            write_histogram_csv(std::fs::File::create(&hist_path)?, &stats)?;
            std::fs::write(
                args.out.join("reduction_stats.json"),
                serde_json::to_string_pretty(&stats)?,
            )?;
            log::info!(
                "mean removed fraction {:.3}, median {:.3} over {} traces",
                stats.mean_fraction,
                stats.median_fraction,
                stats.trace_count
            );
        }
        Err(e) => log::warn!("no statistics emitted: {e}"),
    }
    Ok(())
}

fn cmd_freq(args: FreqArgs) -> Result<()> {
    let problems = load_problems(&args.data)?;
    let report = top_words_report(&problems, args.top)?;
    std::fs::create_dir_all(&args.out)?;
    for (category, words) in &report.categories {
        let path = args.out.join(format!("freq_{}.csv", category.slug()));
        write_category_csv(std::fs::File::create(&path)?, words)?;
        log::info!("wrote {}", path.display());
    }
    std::fs::write(
        args.out.join("freq.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    log::info!(
        "excluded words (in every top-{} list): {:?}",
        report.top_n,
        report.excluded_words
    );
    Ok(())
}

fn cmd_distribution(args: DistributionArgs) -> Result<()> {
    let problems = load_problems(&args.data)?;
    let distribution = operation_distribution(&problems)?;
    let mut csv = String::from("category,fraction\n");
    for (category, fraction) in &distribution {
        csv.push_str(&format!("{category},{fraction}\n"));
        println!("{category}\t{fraction:.4}");
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        let path = out.join("op_distribution.csv");
        std::fs::write(&path, csv)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}
