//! Bag-of-features neural scorer: feature embeddings, average pooling and a
//! fully connected projection to code vectors, trained with the Circle loss.

mod checkpoint;
mod loss;
mod model;
mod optim;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use loss::{circle_loss, circle_loss_grad, circle_loss_pairs};
pub use model::{
    backward, batch_loss, embed_input, embed_program, grad_check, similarity_matrix, BofModel, GradCheck, Gradients,
    Pooling,
};
pub use optim::{adamw_step, AdamW, Moments, OptimizerState};
pub use train::{evaluate_map_at_r, sample_pk_batch, train, Batch, EncodedCorpus, EpochStats, TrainHyper, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum BofError {
    #[error("invalid hyperparameter: {0}")]
    Hyper(String),
    #[error("program {0} has a zero code vector")]
    ZeroCodeVector(usize),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("need at least {need} classes, have {have}")]
    TooFewClasses { need: usize, have: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Eval(#[from] crate::evalkit::EvalError),
}
