//! Generative adversarial networks for correlation matrices, written from
//! scratch on top of `nalgebra`: layers with exact backpropagation, a
//! dense and a convolutional architecture, adversarial training and
//! bit-exact checkpoints.

pub mod arch;
pub mod checkpoint;
pub mod error;
pub mod layers;
pub mod model;
pub mod network;
pub mod train;

pub use arch::{ArchitectureDescriptor, Variant};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use error::{GanError, Result};
pub use layers::{Activation, Layer, Mode};
pub use model::{
    backward, discriminator_forward, generate, generator_forward, init_model, loss_value, GanModel, Gradient, LossSpec,
};
pub use network::Network;
pub use train::{train, Adam, TrainConfig, TrainingLog};
