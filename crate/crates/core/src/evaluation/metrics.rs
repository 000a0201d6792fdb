use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use super::invariance::{permutation_averaged_condlik, permutation_averaged_loglik, sample_orders};
use super::{log_partition, EvalError, PartitionMethod};
use crate::data::Dataset;
use crate::math::{argmax, log_sum_exp, softplus};
use crate::model::{ModelParams, Permutation};

/// Mean over consecutive minibatches of the largest posterior mode of `z`
/// (over `1 ..= l + 1`) within the batch, rounded to the nearest integer.
pub fn effective_hidden_size(
    params: &ModelParams,
    data: &Dataset,
    minibatch_size: usize,
) -> Result<usize, EvalError> {
    if minibatch_size == 0 {
        return Err(EvalError::Invalid("minibatch size must be positive".into()));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut total = 0.0;
    let mut batches = 0usize;
    for batch in data.examples().chunks(minibatch_size) {
        let mut best = 0;
        for v in batch {
            best = best.max(params.z_posterior(v, None)?.argmax_head());
        }
        total += best as f64;
        batches += 1;
    }
    Ok((total / batches as f64).round() as usize)
}

/// `log` of the unnormalized marginal of `v` in the classic RBM made of the
/// first `min(z, l)` units; units past `l` would add the same `ln 2` to
/// every `v` and are dropped from both numerator and partition.
fn clamped_log_weight(params: &ModelParams, v: &[u8], m: usize) -> f64 {
    let vb = params.visible_term(v, None);
    let input = params.input_activations(v);
    if params.is_discriminative() {
        let per_label: Vec<f64> = (0..params.classes())
            .map(|k| {
                let hid: f64 = (0..m)
                    .map(|i| softplus(input[i] + params.label_weights()[i * params.classes() + k]))
                    .sum();
                params.label_bias()[k] + hid
            })
            .collect();
        vb + log_sum_exp(&per_label)
    } else {
        vb + input[..m].iter().map(|&a| softplus(a)).sum::<f64>()
    }
}

/// Exact partition of the classic RBM obtained by clamping `z = n_h`,
/// enumerating whichever of the visible or hidden layer is smaller.
pub fn converted_log_partition(
    params: &ModelParams,
    n_h: usize,
    cap: usize,
) -> Result<f64, EvalError> {
    let m = n_h.min(params.units());
    let d = params.visible();
    if d <= cap && (d <= m || m > cap) {
        let terms: Vec<f64> = (0..1usize << d)
            .map(|k| clamped_log_weight(params, &super::exact::visible_from_index(k, d), m))
            .collect();
        return Ok(log_sum_exp(&terms));
    }
    if m > cap {
        return Err(EvalError::TooLarge { visible: d.min(m), cap });
    }
    let c = params.classes();
    let labels: Vec<Option<usize>> = if c == 0 { vec![None] } else { (0..c).map(Some).collect() };
    let mut terms = Vec::with_capacity((1usize << m) * labels.len());
    let mut logits = vec![0.0; d];
    for bits in 0..1usize << m {
        logits.copy_from_slice(params.visible_bias());
        let mut hid = 0.0;
        for i in (0..m).filter(|i| (bits >> i) & 1 == 1) {
            hid += params.hidden_bias()[i];
            for (l, w) in logits.iter_mut().zip(params.unit_weights(i)) {
                *l += w;
            }
        }
        let vis: f64 = logits.iter().map(|&l| softplus(l)).sum();
        for &y in &labels {
            let lab = match y {
                None => 0.0,
                Some(k) => {
                    params.label_bias()[k]
                        + (0..m)
                            .filter(|i| (bits >> i) & 1 == 1)
                            .map(|i| params.label_weights()[i * c + k])
                            .sum::<f64>()
                }
            };
            terms.push(hid + vis + lab);
        }
    }
    Ok(log_sum_exp(&terms))
}

/// Mean `ln p(v | z = n_h)` of the model read as a classic RBM with `n_h`
/// hidden units.
pub fn converted_rbm_loglik<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    n_h: usize,
    method: &PartitionMethod,
    rng: &mut R,
) -> Result<f64, EvalError> {
    if n_h == 0 {
        return Err(EvalError::Invalid("hidden size must be positive".into()));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let log_z = match method {
        PartitionMethod::Exact { cap } => converted_log_partition(params, n_h, *cap)?,
        PartitionMethod::Ais(opts) => {
            let mut opts = opts.clone();
            opts.clamp = Some(n_h);
            super::ais::ais_with(params, &opts, rng)?.log_z
        }
    };
    let m = n_h.min(params.units());
    let mut total = 0.0;
    for v in data.examples() {
        params.check_visible(v)?;
        total += clamped_log_weight(params, v, m) - log_z;
    }
    Ok(total / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationMetrics {
    pub error: f64,
    pub predictions: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Predicts `argmax_y` of `p(y | v)` averaged over the given orderings; ties
/// go to the lowest class index.
pub fn classify(
    params: &ModelParams,
    data: &Dataset,
    orders: &[Permutation],
) -> Result<ClassificationMetrics, EvalError> {
    let labels = data.labels().ok_or(EvalError::MissingLabels)?;
    if !params.is_discriminative() {
        return Err(EvalError::Model(crate::model::ModelError::NotDiscriminative));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if orders.is_empty() {
        return Err(EvalError::Invalid("at least one ordering is required".into()));
    }
    let models = orders
        .iter()
        .map(|p| params.apply_permutation(p))
        .collect::<Result<Vec<_>, _>>()?;
    let c = params.classes();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut predictions = Vec::with_capacity(data.len());
    let mut wrong = 0usize;
    for (v, y) in data.examples().iter().zip(labels) {
        let mut avg = vec![0.0; c];
        for q in &models {
            for (a, p) in avg.iter_mut().zip(q.cond_y_given_v(v)?) {
                *a += p;
            }
        }
        let pred = argmax(&avg);
        confusion[y.index()][pred] += 1;
        wrong += usize::from(pred != y.index());
        predictions.push(pred);
    }
    Ok(ClassificationMetrics {
        error: wrong as f64 / data.len() as f64,
        predictions,
        confusion,
    })
}

/// `argmax_z` over `1 ..= l + 1` of `sum_k p(z | v; order_k)` for each example.
pub fn z_modes(
    params: &ModelParams,
    data: &Dataset,
    orders: &[Permutation],
) -> Result<Vec<usize>, EvalError> {
    let models = orders
        .iter()
        .map(|p| params.apply_permutation(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(data.len());
    for v in data.examples() {
        let mut acc = vec![0.0; params.units() + 1];
        for q in &models {
            for (a, p) in acc.iter_mut().zip(q.z_posterior(v, None)?.head_probs()) {
                *a += p;
            }
        }
        out.push(argmax(&acc) + 1);
    }
    Ok(out)
}

pub fn histogram(values: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &v in values {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    /// Number of orderings averaged over (the first is the current one).
    pub n_orders: usize,
    /// Leading units reordered; all materialized units when absent.
    pub permuted_units: Option<usize>,
    pub partition: PartitionMethod,
    pub minibatch_size: usize,
    /// Also score the classic RBM obtained by clamping `z` at `N_h`.
    pub converted: bool,
    /// Skip the (possibly expensive) generative likelihood.
    pub skip_loglik: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            n_orders: 5,
            permuted_units: None,
            partition: PartitionMethod::Exact {
                cap: super::DEFAULT_EXACT_CAP,
            },
            minibatch_size: 100,
            converted: false,
            skip_loglik: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub examples: usize,
    pub units: usize,
    pub orders: usize,
    pub avg_loglik: Option<f64>,
    pub avg_cond_loglik: Option<f64>,
    pub classification_error: Option<f64>,
    pub n_h: usize,
    pub z_m_histogram: BTreeMap<usize, usize>,
    pub converted_rbm_loglik: Option<f64>,
}

/// Likelihood, classification error (when labels and label units exist),
/// effective size and the histogram of per-example `z` modes.
pub fn evaluate<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    opts: &EvalOptions,
    rng: &mut R,
) -> Result<EvalReport, EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let m = opts.permuted_units.unwrap_or(params.units()).min(params.units());
    let orders = sample_orders(m, opts.n_orders.max(1), rng);
    let avg_loglik = if opts.skip_loglik {
        None
    } else {
        Some(permutation_averaged_loglik(params, data, &orders, &opts.partition, rng)?)
    };
    let labeled = params.is_discriminative() && data.labels().is_some();
    let (avg_cond_loglik, classification_error) = if labeled {
        (
            Some(permutation_averaged_condlik(params, data, &orders)?),
            Some(classify(params, data, &orders)?.error),
        )
    } else {
        (None, None)
    };
    let n_h = effective_hidden_size(params, data, opts.minibatch_size)?;
    let converted_rbm_loglik = if opts.converted {
        Some(converted_rbm_loglik(params, data, n_h, &opts.partition, rng)?)
    } else {
        None
    };
    Ok(EvalReport {
        examples: data.len(),
        units: params.units(),
        orders: orders.len(),
        avg_loglik,
        avg_cond_loglik,
        classification_error,
        n_h,
        z_m_histogram: histogram(&z_modes(params, data, &orders)?),
        converted_rbm_loglik,
    })
}

/// Convenience for an unlabeled log-likelihood under the given partition.
pub fn loglik<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    method: &PartitionMethod,
    rng: &mut R,
) -> Result<f64, EvalError> {
    let log_z = log_partition(params, method, rng)?;
    super::exact::mean_loglik_given_partition(params, data, log_z)
}
