//! A workbench around a reference seq2seq math-word-problem solver: corpus
//! handling, prefix-equation evaluation, part-of-speech perturbation suites,
//! per-operation word-frequency analysis, confidence-driven input reduction,
//! and a cross-validation experiment harness.

pub mod corpus;
pub mod equation;
pub mod freq;
pub mod harness;
pub mod perturb;
pub mod reduce;
pub mod solver;
pub mod synth;
pub mod tagger;

pub use corpus::{Category, CVSplit, MathWordProblem};
pub use equation::PrefixEquation;
pub use perturb::PerturbationSpec;
pub use solver::{Prediction, Predictor, SolverConfig, TrainedModel};
pub use tagger::{Tag, TaggedToken, TaggerBackend};
