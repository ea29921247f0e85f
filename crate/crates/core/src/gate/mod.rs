// SPDX-License-Identifier: Apache-2.0
//! Graph attention auto-encoder producing one scalar embedding per register.

mod checkpoint;
mod corpus;
mod layer;
pub mod matrix;
mod model;
mod optim;
mod train;

pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_model, save_model, CHECKPOINT_VERSION};
pub use corpus::{structure_key, Corpus};
pub use layer::{attention_logits, attention_weights, encoder_layer, Activation, AttentionLayer, LayerParams, Neighborhoods};
pub use matrix::Matrix;
pub use model::{
    reconstruction_loss, GateModel, LossBreakdown, ModelShape, NodeRepresentations, Parameters, RegisterEmbedding,
    Subgraph,
};
pub use optim::{adam_step, clip_global_norm, AdamConfig, AdamState, StepReport};
pub use train::{evaluate_loss, train, train_with_progress, TrainConfig, TrainOutcome};
