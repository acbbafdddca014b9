//! Driving-perception toolkit: a classical lane-detection pipeline, a small
//! from-scratch CNN engine with the layers, losses and optimizers needed to
//! train traffic-sign, behavioral-cloning, segmentation and vehicle models,
//! dataset handling, and evaluation metrics.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod imaging;
pub mod lane;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use rng::Prng;
pub use tensor::Tensor;
