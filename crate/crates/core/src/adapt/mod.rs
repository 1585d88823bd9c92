//! The contrastive objective with analytic gradients, negative sampling and
//! a trainable linear adapter over frozen provider embeddings.

mod adapter;
mod loss;
mod train;

pub use adapter::{apply_adapter, AdaptedProvider, Adapter};
pub use loss::{
    contrastive_loss, contrastive_loss_grad, grad_slices, loss_slices, ContrastiveExample, Distance, LossParams,
};
pub use train::{
    derangement, sample_negatives, train_adapter, train_adapter_on_texts, train_adapter_on_vectors, write_train_log_csv,
    LogEntry, TrainConfig, TrainOutcome, MIN_TRAIN_PAIRS, TRAIN_LOG_HEADER,
};
