//! The differentiable victim model: a program summarizer predicting
//! function-name subtokens from the token bag, with exact reverse-mode
//! gradients for parameters and relaxed input rows.

pub mod checkpoint;
pub mod model;
pub mod train;

pub use checkpoint::{load, save, CheckpointError};
pub use model::{Arch, Logits, ModelError, OutputVocab, Params, SummarizerModel, PAD};
pub use train::{
    build_dataset, init_model, per_position_accuracy, train, train_batch, Dataset, ModelConfig,
    TrainError, TrainOutput, TrainParams,
};
