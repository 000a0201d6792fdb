//! Exact oracles, partition-function estimation, order-invariance checks and
//! the metrics reported during training and evaluation.

mod ais;
mod check;
mod exact;
mod invariance;
mod metrics;

use rand::Rng;
use thiserror::Error;

use crate::model::{ModelError, ModelParams};
use crate::training::TrainError;

pub use ais::{ais_log_partition, ais_with, base_rate_bias, geometric_schedule, AisEstimate, AisOptions};
pub use check::{gradient_check, relative_error, GradCheckReport};
pub use exact::{
    exact_cond_loglik, exact_log_partition, exact_loglik, exact_nll_gradient, log_prob_visible,
    visible_from_index, DEFAULT_EXACT_CAP,
};
pub use invariance::{
    check_order_invariance, check_order_invariance_capped, permutation_averaged_condlik,
    permutation_averaged_loglik, sample_orders, InvarianceReport,
};
pub use metrics::{
    classify, converted_log_partition, converted_rbm_loglik, effective_hidden_size, evaluate,
    histogram, loglik, z_modes, ClassificationMetrics, EvalOptions, EvalReport,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{visible} units are too many to enumerate (cap {cap})")]
    TooLarge { visible: usize, cap: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{count} importance weights were not finite")]
    NonFiniteWeights { count: usize },
    #[error("dataset has no labels")]
    MissingLabels,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("{0}")]
    Invalid(String),
}

/// How `log Z` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PartitionMethod {
    Exact { cap: usize },
    Ais(AisOptions),
}

impl PartitionMethod {
    /// Exact when `D` fits under the default cap, otherwise AIS with the
    /// given budget and base rates.
    pub fn auto(visible: usize, ais: AisOptions) -> Self {
        if visible <= DEFAULT_EXACT_CAP {
            PartitionMethod::Exact {
                cap: DEFAULT_EXACT_CAP,
            }
        } else {
            PartitionMethod::Ais(ais)
        }
    }
}

pub fn log_partition<R: Rng + ?Sized>(
    params: &ModelParams,
    method: &PartitionMethod,
    rng: &mut R,
) -> Result<f64, EvalError> {
    match method {
        PartitionMethod::Exact { cap } => exact_log_partition(params, *cap),
        PartitionMethod::Ais(opts) => Ok(ais_with(params, opts, rng)?.log_z),
    }
}
