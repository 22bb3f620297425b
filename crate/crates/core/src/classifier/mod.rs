//! Shallow CNN: a stack of conv + ReLU + max-pool stages, dropout, and
//! fully connected layers ending in softmax. Forward and backward passes
//! are written out by hand.

mod config;
mod io;
mod layers;
mod model;
mod optim;
mod scalar;
mod train;

pub use config::{ClassifierConfig, ConvSpec, MapShape};
pub use io::{decode_model, encode_model, load_model, load_model_for, save_model};
pub use model::{dropout_mask, image_input, loss, BatchGradients, ModelState, Tensor, LOG_FLOOR};
pub use optim::Adam;
pub use scalar::Scalar;
pub use train::{backward_and_step, train, EpochStats, LabeledSample, TrainingLog};

use crate::error::Result;

/// Fresh model for `config` with seeded He-uniform weights.
pub fn init_model(config: &ClassifierConfig) -> Result<ModelState<f32>> {
    ModelState::init(config)
}
