//! Minimal trainable neural-network engine: layers, activations, losses,
//! optimizers, forward/backward propagation, training loops and gradient
//! checking.
//!
//! Batched tensors are `N×C×H×W` for images and `N×F` for flat features.

mod activation;
pub mod gradcheck;
mod graph;
mod layer;
mod loss;
mod optim;
mod train;

pub use activation::{activation, activation_backward, activation_grad, sigmoid, ActivationKind};
pub use gradcheck::{run_gradcheck, GradcheckConfig, GradcheckReport};
pub use graph::{Gradients, Mode, ModelGraph, Trace};
pub use layer::{LayerKind, LayerSpec};
pub use loss::{fused_loss_grad, loss, loss_grad, LossKind};
pub use optim::{adam_step, rmsprop_step, sgd_step, OptimizerKind, OptimizerState};
pub use train::{
    argmax_accuracy, batch_indices, evaluate, gather_rows, predict_batched, train_epoch, Evaluation, MetricHook,
    Samples,
};
