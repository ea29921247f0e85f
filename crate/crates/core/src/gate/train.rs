// SPDX-License-Identifier: Apache-2.0
//! Unsupervised training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::Activation;
use super::model::{GateModel, ModelShape, Subgraph};
use super::optim::{adam_step, AdamConfig, AdamState};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub gradient_clip: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub heads: usize,
    pub activation: Activation,
    /// Activation of the embedding and reconstruction layers.
    pub output_activation: Activation,
    /// Weight of the optional edge-reconstruction term; 0 disables it.
    pub structure_weight: f64,
    /// Train on structurally distinct path structures only.
    pub dedup: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 200,
            gradient_clip: 5.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            heads: 4,
            activation: Activation::Elu,
            output_activation: Activation::Identity,
            structure_weight: 0.0,
            dedup: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
            ("gradient_clip", self.gradient_clip),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::InvalidArgument("Adam betas must be below 1".into()));
        }
        if self.epochs == 0 || self.heads == 0 {
            return Err(Error::InvalidArgument("epochs and heads must be positive".into()));
        }
        if self.structure_weight < 0.0 {
            return Err(Error::InvalidArgument("structure_weight must not be negative".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            weight_decay: self.weight_decay,
            gradient_clip: self.gradient_clip,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: GateModel<T>,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
    /// Mean corpus loss before the first update.
    pub initial_loss: f64,
    /// Mean corpus loss after the last update.
    pub final_loss: f64,
    pub max_norm_before_clip: f64,
    pub max_norm_after_clip: f64,
    pub steps: u64,
}

/// Mean total loss over `samples`.
pub fn evaluate_loss<T: Scalar>(model: &GateModel<T>, samples: &[Subgraph<T>], structure_weight: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut total = 0.0;
    for sg in samples {
        total += model.loss(sg, structure_weight)?.total;
    }
    Ok(total / samples.len() as f64)
}

/// One forward/backward/update per sample per epoch, sample order
/// reshuffled each epoch from the seed.
pub fn train<T: Scalar>(samples: &[Subgraph<T>], config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with_progress(samples, config, |_, _| {})
}

pub fn train_with_progress<T: Scalar>(
    samples: &[Subgraph<T>],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut model = GateModel::new(ModelShape::default(), config.heads, config.activation, config.seed)?
        .with_output_activation(config.output_activation);
    let initial_loss = evaluate_loss(&model, samples, config.structure_weight)?;
    let adam = config.adam();
    let mut state = AdamState::new(&model.params);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e_ed0f_5b0f_f1e5);
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let (mut max_before, mut max_after) = (0.0f64, 0.0f64);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &idx in &order {
            let (loss, mut grads) = model.loss_and_gradients(&samples[idx], config.structure_weight)?;
            if !loss.total.is_finite() {
                return Err(Error::Divergence {
                    epoch: epoch + 1,
                    loss: loss.total,
                });
            }
            let report = adam_step(&mut model.params, &mut grads, &mut state, &adam).map_err(|e| match e {
                Error::NonFiniteGradient(m) => Error::NonFiniteGradient(format!("epoch {}: {m}", epoch + 1)),
                other => other,
            })?;
            max_before = max_before.max(report.norm_before_clip);
            max_after = max_after.max(report.norm_after_clip);
            epoch_loss += loss.total;
        }
        let mean = epoch_loss / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence {
                epoch: epoch + 1,
                loss: mean,
            });
        }
        loss_trace.push(mean);
        on_epoch(epoch + 1, mean);
    }
    let final_loss = evaluate_loss(&model, samples, config.structure_weight)?;
    if !final_loss.is_finite() || !model.params.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
            loss: final_loss,
        });
    }
    Ok(TrainOutcome {
        model,
        loss_trace,
        initial_loss,
        final_loss,
        max_norm_before_clip: max_before,
        max_norm_after_clip: max_after,
        steps: state.t,
    })
}
