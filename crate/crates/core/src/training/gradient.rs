//! Gradients of the free energy and of the three training losses.
//!
//! Losses are per-example averages of `-ln p(v)` (generative) and
//! `-ln p(y | v)` (discriminative); every gradient returned here is the
//! gradient of the loss, so a descent step subtracts it.

use super::{Gradient, TrainError};
use crate::inference::{ChainStart, LabelChainState, NegativeSample};
use crate::math::{sigmoid, softmax};
use crate::model::{Label, ModelParams, ParamBlock};
use serde::{Deserialize, Serialize};

/// How the discriminative and generative terms are weighted in the hybrid
/// objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridConvention {
    /// `(1 + alpha) * dis + alpha * gen`.
    #[default]
    Scaled,
    /// `dis + alpha * gen`.
    Plain,
}

/// `(w_dis, w_gen)` for the hybrid objective.
pub fn hybrid_weights(alpha: f64, convention: HybridConvention) -> (f64, f64) {
    match convention {
        HybridConvention::Scaled => (1.0 + alpha, alpha),
        HybridConvention::Plain => (1.0, alpha),
    }
}

pub fn hybrid_gradient(
    dis: &Gradient,
    gen: &Gradient,
    alpha: f64,
    convention: HybridConvention,
) -> Gradient {
    let (wd, wg) = hybrid_weights(alpha, convention);
    let mut out = Gradient::zeros(dis.visible(), dis.classes(), dis.units());
    out.add_scaled(dis, wd);
    out.add_scaled(gen, wg);
    out
}

/// Adds `scale * dF/dtheta` at `(v, y)`, where unit `i` (0-based) is
/// weighted by `gate(i)`, the probability that the cutoff includes it.
/// Without `visible_term` the `v . b_v` part is skipped, giving `dG/dtheta`.
#[allow(clippy::too_many_arguments)]
fn add_free_energy_grad(
    params: &ModelParams,
    g: &mut Gradient,
    v: &[u8],
    input: &[f64],
    y: Option<Label>,
    gate: impl Fn(usize) -> f64,
    visible_term: bool,
    scale: f64,
) {
    let d = params.visible();
    let c = params.classes();
    let penalty = params.penalty();
    let hb = params.hidden_bias();
    let u = params.label_weights();
    let mut coef = vec![0.0; params.units()];
    {
        let gc = g.block_mut(ParamBlock::HiddenBias);
        for i in 0..params.units() {
            let p = gate(i);
            if p == 0.0 {
                continue;
            }
            let a = input[i] + y.map_or(0.0, |y| u[i * c + y.index()]);
            coef[i] = p * sigmoid(a);
            gc[i] -= scale * (coef[i] - p * penalty.unit_penalty_slope(hb[i]));
        }
    }
    let gw = g.block_mut(ParamBlock::Weights);
    for (i, &k) in coef.iter().enumerate() {
        if k == 0.0 {
            continue;
        }
        let row = &mut gw[i * d..(i + 1) * d];
        for (x, &b) in row.iter_mut().zip(v) {
            if b != 0 {
                *x -= scale * k;
            }
        }
    }
    if let Some(y) = y {
        let gu = g.block_mut(ParamBlock::LabelWeights);
        for (i, &k) in coef.iter().enumerate() {
            gu[i * c + y.index()] -= scale * k;
        }
        g.block_mut(ParamBlock::LabelBias)[y.index()] -= scale;
    }
    if visible_term {
        for (x, &b) in g.block_mut(ParamBlock::VisibleBias).iter_mut().zip(v) {
            *x -= scale * f64::from(b);
        }
    }
}

/// `dF(v[, y], z)/dtheta` at a fixed cutoff, or averaged over `p(z | v[, y])`
/// when `z` is `None`.
pub fn free_energy_gradient(
    params: &ModelParams,
    v: &[u8],
    y: Option<Label>,
    z: Option<usize>,
) -> Result<Gradient, TrainError> {
    params.check_visible(v)?;
    params.check_label(y)?;
    let input = params.input_activations(v);
    let mut g = Gradient::zeros_like(params);
    match z {
        Some(z) => add_free_energy_grad(params, &mut g, v, &input, y, |i| gate(i, z), true, 1.0),
        None => {
            let post = params.z_posterior(v, y)?;
            add_free_energy_grad(
                params,
                &mut g,
                v,
                &input,
                y,
                |i| post.prob_at_least(i + 1),
                true,
                1.0,
            )
        }
    }
    Ok(g)
}

#[inline]
fn gate(i: usize, z: usize) -> f64 {
    if i < z {
        1.0
    } else {
        0.0
    }
}

fn check_cutoff(params: &ModelParams, z: usize) -> Result<(), TrainError> {
    if z == 0 || z > params.units() + 1 {
        return Err(TrainError::StaleStatistics {
            z,
            max: params.units() + 1,
        });
    }
    Ok(())
}

/// Sampled gradient of the generative loss: mean `dF` at the positive
/// statistics minus mean `dF` at the negative ones. With labels present the
/// model is the joint `p(v, y)`.
pub fn grad_generative(
    params: &ModelParams,
    positives: &[ChainStart<'_>],
    negatives: &[NegativeSample],
) -> Result<Gradient, TrainError> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut g = Gradient::zeros_like(params);
    let sp = 1.0 / positives.len() as f64;
    for s in positives {
        params.check_visible(s.v)?;
        params.check_label(s.y)?;
        check_cutoff(params, s.z)?;
        let input = params.input_activations(s.v);
        add_free_energy_grad(params, &mut g, s.v, &input, s.y, |i| gate(i, s.z), true, sp);
    }
    let sn = -1.0 / negatives.len() as f64;
    for s in negatives {
        params.check_visible(&s.v)?;
        params.check_label(s.y)?;
        check_cutoff(params, s.z)?;
        let input = params.input_activations(&s.v);
        add_free_energy_grad(params, &mut g, &s.v, &input, s.y, |i| gate(i, s.z), true, sn);
    }
    Ok(g)
}

/// Adds `scale * d(-ln p(y | v))/dtheta`, with every `z` and `y'` summed out
/// in closed form.
pub(crate) fn add_discriminative_exact(
    params: &ModelParams,
    g: &mut Gradient,
    v: &[u8],
    y: Label,
    scale: f64,
) {
    let input = params.input_activations(v);
    let posts: Vec<_> = (0..params.classes())
        .map(|k| params.z_posterior_from_input(v, &input, Some(Label::from_index(k))))
        .collect();
    let norms: Vec<f64> = posts.iter().map(|p| p.log_norm()).collect();
    let py = softmax(&norms);
    for (k, post) in posts.iter().enumerate() {
        let w = if k == y.index() { 1.0 } else { 0.0 } - py[k];
        if w == 0.0 {
            continue;
        }
        add_free_energy_grad(
            params,
            g,
            v,
            &input,
            Some(Label::from_index(k)),
            |i| post.prob_at_least(i + 1),
            false,
            scale * w,
        );
    }
}

/// Gradient of the mean of `-ln p(y_n | v_n)` with exact sums over `z` and
/// over competing labels.
pub fn grad_discriminative_exact(
    params: &ModelParams,
    examples: &[&[u8]],
    labels: &[Label],
) -> Result<Gradient, TrainError> {
    if !params.is_discriminative() {
        return Err(TrainError::MissingLabels);
    }
    if examples.len() != labels.len() {
        return Err(TrainError::BatchMismatch {
            expected: examples.len(),
            got: labels.len(),
        });
    }
    if examples.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut g = Gradient::zeros_like(params);
    let s = 1.0 / examples.len() as f64;
    for (&v, &y) in examples.iter().zip(labels) {
        params.check_visible(v)?;
        params.check_label(Some(y))?;
        add_discriminative_exact(params, &mut g, v, y, s);
    }
    Ok(g)
}

/// Sampled gradient of the discriminative loss: `dG(y_n, z_pos | v_n)`
/// minus `dG(y_neg, z_neg | v_n)`, averaged over the minibatch.
pub fn grad_discriminative_sampled(
    params: &ModelParams,
    positives: &[ChainStart<'_>],
    negatives: &[LabelChainState],
) -> Result<Gradient, TrainError> {
    if !params.is_discriminative() {
        return Err(TrainError::MissingLabels);
    }
    if positives.len() != negatives.len() {
        return Err(TrainError::BatchMismatch {
            expected: positives.len(),
            got: negatives.len(),
        });
    }
    if positives.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut g = Gradient::zeros_like(params);
    let s = 1.0 / positives.len() as f64;
    for (pos, neg) in positives.iter().zip(negatives) {
        let y = pos.y.ok_or(TrainError::MissingLabels)?;
        params.check_visible(pos.v)?;
        params.check_label(Some(y))?;
        params.check_label(Some(neg.y))?;
        check_cutoff(params, pos.z)?;
        check_cutoff(params, neg.z)?;
        let input = params.input_activations(pos.v);
        add_free_energy_grad(params, &mut g, pos.v, &input, Some(y), |i| gate(i, pos.z), false, s);
        add_free_energy_grad(
            params,
            &mut g,
            pos.v,
            &input,
            Some(neg.y),
            |i| gate(i, neg.z),
            false,
            -s,
        );
    }
    Ok(g)
}
