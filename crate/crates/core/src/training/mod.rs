//! Random-permutation training: gradients of the generative, discriminative
//! and hybrid losses, the optimizer, the regroup schedule and the growth
//! rule.

mod buffer;
mod config;
mod gradient;
mod optimizer;
mod regroup;
mod trainer;

pub use buffer::{Gradient, ParamBuffer};
pub use config::{DisGradient, LrMode, Objective, RegroupMode, TrainConfig};
pub use gradient::{
    free_energy_gradient, grad_discriminative_exact, grad_discriminative_sampled,
    grad_generative, hybrid_gradient, hybrid_weights, HybridConvention,
};
pub use optimizer::{OptimizerState, StepRule};
pub use regroup::{adaptive_m, EpochStats, RegroupState};
pub use trainer::{growth_decision, sample_permutation, StepStats, TrainState};


use thiserror::Error;

use crate::inference::InferenceError;
use crate::model::{ModelError, ParamBlock};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("non-finite value in the gradient of block {block}")]
    NonFinite { block: ParamBlock },
    #[error("the objective needs labels but none were given")]
    MissingLabels,
    #[error("minibatch is empty")]
    EmptyBatch,
    #[error("expected {expected} entries, got {got}")]
    BatchMismatch { expected: usize, got: usize },
    #[error("cutoff z = {z} does not fit the current model (max {max}); statistics are stale")]
    StaleStatistics { z: usize, max: usize },
}
