use serde::{Deserialize, Serialize};

use super::model::BofModel;
use super::optim::OptimizerState;
use super::train::{EpochStats, TrainHyper, TrainOutcome};
use super::BofError;
use crate::featurize::Vocabulary;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned model container; embeds the vocabulary so it can score new programs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: Option<String>,
    pub vocab_hash: String,
    vocabulary: serde_json::Value,
    pub hyper: TrainHyper,
    pub model: BofModel,
    pub optimizer: OptimizerState,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn new(outcome: TrainOutcome, vocab: &Vocabulary, hyper: &TrainHyper, config: Option<String>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config,
            vocab_hash: vocab.hash(),
            vocabulary: serde_json::from_str(&vocab.to_json()).expect("vocabulary json"),
            hyper: hyper.clone(),
            model: outcome.model,
            optimizer: outcome.optimizer,
            history: outcome.history,
            best_epoch: outcome.best_epoch,
        }
    }

    pub fn vocabulary(&self) -> Result<Vocabulary, BofError> {
        Vocabulary::from_json(&self.vocabulary.to_string()).map_err(|e| BofError::Checkpoint(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BofError> {
        let err = |m: String| BofError::Checkpoint(m);
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| err(e.to_string()))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported version {}", ck.version)));
        }
        let vocab = ck.vocabulary()?;
        if vocab.hash() != ck.vocab_hash {
            return Err(err("vocabulary hash mismatch".into()));
        }
        let m = &ck.model;
        let shapes = [
            (m.vocab_size, vocab.len()),
            (m.embeddings.len(), vocab.len() * m.dim),
            (m.weight.len(), m.dim * m.dim),
            (m.bias.len(), m.dim),
            (ck.optimizer.embeddings.m.len(), m.embeddings.len()),
            (ck.optimizer.weight.m.len(), m.weight.len()),
            (ck.optimizer.bias.m.len(), m.bias.len()),
        ];
        for (found, expected) in shapes {
            if found != expected {
                return Err(BofError::Shape { expected, found });
            }
        }
        Ok(ck)
    }
}
