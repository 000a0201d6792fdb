//! Exhaustive oracles for models small enough to enumerate every visible
//! configuration.

use super::EvalError;
use crate::data::Dataset;
use crate::math::{log_sum_exp, softmax};
use crate::model::{Label, ModelParams};
use crate::training::{free_energy_gradient, Gradient};

/// Default largest visible dimension that is enumerated exhaustively.
pub const DEFAULT_EXACT_CAP: usize = 14;

/// Bits of `index` as a visible vector, least significant bit first.
pub fn visible_from_index(index: usize, visible: usize) -> Vec<u8> {
    (0..visible).map(|j| ((index >> j) & 1) as u8).collect()
}

fn check_cap(params: &ModelParams, cap: usize) -> Result<(), EvalError> {
    if params.visible() > cap || params.visible() >= usize::BITS as usize {
        return Err(EvalError::TooLarge {
            visible: params.visible(),
            cap,
        });
    }
    Ok(())
}

/// `log sum_v sum_z e^{-F(v, z)}` (also summing `y` for a labeled model),
/// with the tail over `z` in closed form.
pub fn exact_log_partition(params: &ModelParams, cap: usize) -> Result<f64, EvalError> {
    check_cap(params, cap)?;
    let d = params.visible();
    let terms: Vec<f64> = (0..1usize << d)
        .map(|k| {
            let v = visible_from_index(k, d);
            params.z_posterior_unchecked(&v, None).log_norm()
        })
        .collect();
    Ok(log_sum_exp(&terms))
}

/// `ln p(v)` for a labeled or unlabeled model given its log partition.
pub fn log_prob_visible(params: &ModelParams, v: &[u8], log_z: f64) -> Result<f64, EvalError> {
    Ok(params.z_posterior(v, None)?.log_norm() - log_z)
}

/// Mean of `ln p(v_n)` over the dataset.
pub fn exact_loglik(params: &ModelParams, data: &Dataset, cap: usize) -> Result<f64, EvalError> {
    let log_z = exact_log_partition(params, cap)?;
    mean_loglik_given_partition(params, data, log_z)
}

pub(crate) fn mean_loglik_given_partition(
    params: &ModelParams,
    data: &Dataset,
    log_z: f64,
) -> Result<f64, EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut total = 0.0;
    for v in data.examples() {
        total += log_prob_visible(params, v, log_z)?;
    }
    Ok(total / data.len() as f64)
}

/// Exact gradient of the mean of `-ln p(v_n)`, or of `-ln p(v_n, y_n)` when
/// labels are given, with both expectations enumerated.
pub fn exact_nll_gradient(
    params: &ModelParams,
    examples: &[&[u8]],
    labels: Option<&[Label]>,
    cap: usize,
) -> Result<Gradient, EvalError> {
    check_cap(params, cap)?;
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut g = Gradient::zeros_like(params);
    let s = 1.0 / examples.len() as f64;
    for (n, v) in examples.iter().enumerate() {
        match labels {
            Some(ls) => g.add_scaled(&free_energy_gradient(params, v, Some(ls[n]), None)?, s),
            None => add_marginal_grad(params, &mut g, v, s)?,
        }
    }
    let log_z = exact_log_partition(params, cap)?;
    let d = params.visible();
    for k in 0..1usize << d {
        let v = visible_from_index(k, d);
        let w = (params.z_posterior_unchecked(&v, None).log_norm() - log_z).exp();
        add_marginal_grad(params, &mut g, &v, -w)?;
    }
    Ok(g)
}

/// Adds `scale * dF(v)/dtheta` with `z` (and `y`, if labeled) summed out.
fn add_marginal_grad(
    params: &ModelParams,
    g: &mut Gradient,
    v: &[u8],
    scale: f64,
) -> Result<(), EvalError> {
    if params.is_discriminative() {
        let posts = params.label_posteriors(v)?;
        let py = softmax(&posts.iter().map(|p| p.log_norm()).collect::<Vec<_>>());
        for (k, &p) in py.iter().enumerate() {
            let y = Label::new(k, params.classes())?;
            g.add_scaled(&free_energy_gradient(params, v, Some(y), None)?, scale * p);
        }
    } else {
        g.add_scaled(&free_energy_gradient(params, v, None, None)?, scale);
    }
    Ok(())
}

/// Mean of `ln p(y_n | v_n)`.
pub fn exact_cond_loglik(params: &ModelParams, data: &Dataset) -> Result<f64, EvalError> {
    let labels = data.labels().ok_or(EvalError::MissingLabels)?;
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut total = 0.0;
    for (v, y) in data.examples().iter().zip(labels) {
        total += params.log_cond_y_given_v(v)?[y.index()];
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::math::LN_TWO;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seeded(d: usize, c: usize, l: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::random_uniform(d, c, l, 1.0, PenaltyConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn zero_model_partition_is_closed_form() {
        let p = ModelParams::zeros(2, 0, 3, PenaltyConfig::default()).unwrap();
        let r: f64 = 2f64.powf(-0.01);
        let want = 2.0 * LN_TWO + (r / (1.0 - r)).ln();
        let got = exact_log_partition(&p, 14).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((got - 6.35451).abs() < 1e-5);
    }

    #[test]
    fn partition_shift_under_extra_penalty() {
        // Raising beta changes only the geometric ratio of a zero model.
        let p = ModelParams::zeros(3, 0, 2, PenaltyConfig::new(1.5, Default::default()).unwrap())
            .unwrap();
        let r: f64 = 2f64.powf(-0.5);
        let want = 3.0 * LN_TWO + (r / (1.0 - r)).ln();
        assert!((exact_log_partition(&p, 14).unwrap() - want).abs() < 1e-12);
    }

    /// Independent oracle: explicit loops over v and a long truncation in z.
    fn double_loop_log_z(p: &ModelParams) -> f64 {
        let d = p.visible();
        let mut total = 0.0;
        let beta0 = p.penalty().zero_unit_penalty();
        for k in 0..1usize << d {
            let v: Vec<f64> = (0..d).map(|j| ((k >> j) & 1) as f64).collect();
            let vb: f64 = (0..d).map(|j| v[j] * p.visible_bias()[j]).sum();
            let mut acc = vb;
            for z in 1..=20_000 {
                let i = z - 1;
                if i < p.units() {
                    let mut a = p.hidden_bias()[i];
                    for j in 0..d {
                        a += p.weights()[i * d + j] * v[j];
                    }
                    acc += (1.0 + a.exp()).ln() - p.penalty().unit_penalty(p.hidden_bias()[i]);
                } else {
                    acc += LN_TWO - beta0;
                }
                total += acc.exp();
            }
        }
        total.ln()
    }

    #[test]
    fn partition_matches_double_loop_oracle() {
        let p = seeded(3, 0, 2, 42);
        let exact = exact_log_partition(&p, 14).unwrap();
        // The truncated oracle misses r^20000-scale mass, far below 1e-12.
        assert!((exact - double_loop_log_z(&p)).abs() < 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one() {
        for seed in 0..5 {
            let p = seeded(5, (seed % 3) as usize, 3, seed);
            let log_z = exact_log_partition(&p, 14).unwrap();
            let total: f64 = (0..32)
                .map(|k| log_prob_visible(&p, &visible_from_index(k, 5), log_z).unwrap().exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_model_loglik_is_uniform() {
        let p = ModelParams::zeros(4, 0, 2, PenaltyConfig::default()).unwrap();
        let data = Dataset::new(vec![vec![1, 0, 0, 1], vec![0; 4]], None, 4, 0, Split::Test).unwrap();
        let ll = exact_loglik(&p, &data, 14).unwrap();
        assert!((ll + 4.0 * LN_TWO).abs() < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let p = ModelParams::zeros(15, 0, 1, PenaltyConfig::default()).unwrap();
        assert!(matches!(
            exact_log_partition(&p, 14),
            Err(EvalError::TooLarge { visible: 15, cap: 14 })
        ));
    }
}
