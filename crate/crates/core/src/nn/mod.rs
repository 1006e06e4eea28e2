//! Minimal differentiable building blocks: dense layers, an optional
//! convolution front end, losses, Adam and finite-difference checks.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod matrix;
pub mod network;

pub use activation::{relu, sigmoid, Activation};
pub use adam::{AdamConfig, AdamState};
pub use conv::{ConvShape, ConvStage};
pub use layer::DenseLayer;
pub use loss::{bce_loss, ce_loss, loss_and_gradients, Objective};
pub use matrix::Matrix;
pub use network::{ForwardCache, Gradients, Network};
