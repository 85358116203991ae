//! Timing probe: train the default solver on the synthetic corpus and report
//! held-out accuracy. Usage: train_probe [epochs]

use mwpx_core::corpus::{select_by_ids, split_cv_folds};
use mwpx_core::harness::evaluate_accuracy;
use mwpx_core::solver::{train, SolverConfig};
use mwpx_core::synth::generate_corpus;

fn main() {
    let epochs: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let corpus = generate_corpus(500, 42);
    let splits = split_cv_folds(&corpus, 5, 42).unwrap();
    let train_set: Vec<_> = select_by_ids(&corpus, &splits[0].train)
        .into_iter()
        .cloned()
        .collect();
    let test_set: Vec<_> = select_by_ids(&corpus, &splits[0].test)
        .into_iter()
        .cloned()
        .collect();

    let config = SolverConfig {
        epochs,
        ..SolverConfig::default()
    };
    let start = std::time::Instant::now();
    let model = train(&train_set, &config).unwrap();
    let train_time = start.elapsed();
    let start = std::time::Instant::now();
    let accuracy = evaluate_accuracy(&model, &test_set);
    let eval_time = start.elapsed();
    println!(
        "epochs {epochs}: train {train_time:?}, eval {eval_time:?}, held-out accuracy {accuracy:.3}"
    );
    println!(
        "first losses: {:?}",
        &model.metadata.loss_history[..model.metadata.loss_history.len().min(6)]
    );
}
