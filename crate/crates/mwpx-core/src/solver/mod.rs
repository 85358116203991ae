//! The reference seq2seq solver: an RNN encoder-decoder with attention that
//! maps masked question tokens to prefix equation tokens, exposing per-step
//! output probabilities.

pub mod io;
pub mod net;
pub mod vocab;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MathWordProblem;
pub use net::CellKind;
pub use vocab::Vocab;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("problem {id}: {message}")]
    BadTrainingProblem { id: String, message: String },
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("model i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model format error: {0}")]
    Format(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// Solver hyperparameters. The defaults train the reference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub cell: CellKind,
    pub layers: usize,
    pub dropout: f64,
    pub teacher_forcing_ratio: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_decode_len: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 128,
            hidden_dim: 256,
            cell: CellKind::Gru,
            layers: 1,
            dropout: 0.1,
            teacher_forcing_ratio: 0.9,
            learning_rate: 1e-3,
            epochs: 50,
            batch_size: 32,
            max_decode_len: 15,
            seed: 42,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_decode_len", self.max_decode_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SolverError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("dropout", self.dropout),
            ("teacher_forcing_ratio", self.teacher_forcing_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SolverError::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(SolverError::InvalidConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }

    /// A small configuration for tests and smoke runs: trains in seconds on
    /// the bundled corpus and still learns operator selection.
    pub fn small() -> Self {
        Self {
            embedding_dim: 32,
            hidden_dim: 64,
            epochs: 40,
            ..Self::default()
        }
    }
}

/// A decoded equation with per-step posterior probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tokens: Vec<String>,
    pub step_probabilities: Vec<f64>,
    /// Arithmetic mean of `step_probabilities` (0 for an empty decode).
    pub confidence: f64,
}

impl Prediction {
    pub fn new(tokens: Vec<String>, step_probabilities: Vec<f64>) -> Self {
        assert_eq!(tokens.len(), step_probabilities.len());
        let confidence = if step_probabilities.is_empty() {
            0.0
        } else {
            step_probabilities.iter().sum::<f64>() / step_probabilities.len() as f64
        };
        Self {
            tokens,
            step_probabilities,
            confidence,
        }
    }
}

/// Anything that maps question tokens to a prediction. Implemented by
/// [`TrainedModel`] and by test stubs.
pub trait Predictor: Send + Sync {
    fn predict_tokens(&self, tokens: &[String]) -> Prediction;
}

/// Metadata recorded at training time and persisted with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    pub dataset_hash: String,
    pub loss_history: Vec<f64>,
}

/// A trained solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: SolverConfig,
    pub input_vocab: Vocab,
    pub output_vocab: Vocab,
    pub metadata: ModelMetadata,
    params: net::NetParams,
}

impl TrainedModel {
    fn shape(&self) -> net::NetShape {
        net::NetShape {
            cell: self.config.cell,
            layers: self.config.layers,
            embedding: self.config.embedding_dim,
            hidden: self.config.hidden_dim,
            input_vocab: self.input_vocab.len(),
            output_vocab: self.output_vocab.len(),
        }
    }

    pub(crate) fn params(&self) -> &net::NetParams {
        &self.params
    }

    pub(crate) fn from_parts(
        config: SolverConfig,
        input_vocab: Vocab,
        output_vocab: Vocab,
        metadata: ModelMetadata,
        params: net::NetParams,
    ) -> Self {
        Self {
            config,
            input_vocab,
            output_vocab,
            metadata,
            params,
        }
    }

    /// SHA-256 over the serialized parameters; equal checksums mean
    /// bitwise-identical weights.
    pub fn params_checksum(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for (name, t) in self.params.tensors() {
            hasher.update(name.as_bytes());
            for v in t.iter() {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl Predictor for TrainedModel {
    fn predict_tokens(&self, tokens: &[String]) -> Prediction {
        let src = vocab::encode_input(&self.input_vocab, tokens);
        let (ids, probs) = net::decode_greedy(
            &self.shape(),
            &self.params,
            &src,
            self.config.max_decode_len,
        );
        let tokens = ids
            .iter()
            .map(|&id| self.output_vocab.token(id).to_string())
            .collect();
        Prediction::new(tokens, probs)
    }
}

/// Convenience wrapper matching the operation signature.
pub fn predict(model: &TrainedModel, tokens: &[String]) -> Prediction {
    model.predict_tokens(tokens)
}

/// Train a solver. Deterministic for a fixed seed and training-set order.
pub fn train(
    train_set: &[MathWordProblem],
    config: &SolverConfig,
) -> Result<TrainedModel, SolverError> {
    if train_set.is_empty() {
        return Err(SolverError::EmptyTrainSet);
    }
    config.validate()?;

    let input_vocab = vocab::build_input_vocab(train_set);
    let output_vocab = vocab::build_output_vocab(train_set);

    let mut encoded: Vec<(Vec<usize>, Vec<usize>)> = Vec::with_capacity(train_set.len());
    for p in train_set {
        let mut src = vocab::encode_input(&input_vocab, &p.tokens);
        if src.is_empty() {
            src.push(vocab::UNK);
        }
        let mut tgt = vocab::encode_equation(&output_vocab, p.equation.tokens()).map_err(
            |message| SolverError::BadTrainingProblem {
                id: p.id.clone(),
                message,
            },
        )?;
        tgt.push(vocab::EOS);
        encoded.push((src, tgt));
    }

    let shape = net::NetShape {
        cell: config.cell,
        layers: config.layers,
        embedding: config.embedding_dim,
        hidden: config.hidden_dim,
        input_vocab: input_vocab.len(),
        output_vocab: output_vocab.len(),
    };
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut params = net::NetParams::init(&shape, &mut rng);
    let mut adam = net::Adam::new(&params, config.learning_rate);
    let opts = net::TrainOptions {
        dropout: config.dropout,
        teacher_forcing_ratio: config.teacher_forcing_ratio,
    };

    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch = net::Batch {
                src: chunk.iter().map(|&i| encoded[i].0.clone()).collect(),
                tgt: chunk.iter().map(|&i| encoded[i].1.clone()).collect(),
            };
            let mut grads = params.zeros_like();
            let (loss, tokens) =
                net::train_batch(&shape, &params, &mut grads, &batch, &opts, &mut rng);
            adam.step(&mut params, &mut grads);
            epoch_loss += loss;
            epoch_tokens += tokens;
        }
        let mean = epoch_loss / epoch_tokens.max(1) as f64;
        if !mean.is_finite() {
            return Err(SolverError::NonFiniteLoss { epoch });
        }
        loss_history.push(mean);
    }

    Ok(TrainedModel {
        config: config.clone(),
        input_vocab,
        output_vocab,
        metadata: ModelMetadata {
            seed: config.seed,
            fold: None,
            dataset_hash: crate::corpus::dataset_hash(train_set),
            loss_history,
        },
        params,
    })
}
