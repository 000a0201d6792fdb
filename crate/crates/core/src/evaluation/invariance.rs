//! Order sensitivity of the infinite model and likelihoods averaged over
//! orderings of the leading units.

use rand::Rng;
use serde::Serialize;

use super::{log_partition, EvalError, PartitionMethod, DEFAULT_EXACT_CAP};
use crate::data::Dataset;
use crate::evaluation::exact::mean_loglik_given_partition;
use crate::math::log_mean_exp;
use crate::model::{ModelParams, Permutation};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub m: usize,
    pub n_perms: usize,
    /// Max over permutations and examples of `ln p(z <= M | v)`.
    pub max_log_mass: f64,
    pub mean_log_mass: f64,
    /// Exact mean log-likelihood under each permutation, when enumerable.
    pub per_permutation_loglik: Option<Vec<f64>>,
    /// `max - min` of `per_permutation_loglik`.
    pub spread: Option<f64>,
}

/// Reorders the first `m` units `n_perms` times at random and measures how
/// much mass the cutoff puts at or below `m`. When that mass is negligible the
/// distribution over `v` does not depend on the order of those units.
pub fn check_order_invariance<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    m: usize,
    n_perms: usize,
    rng: &mut R,
) -> Result<InvarianceReport, EvalError> {
    check_order_invariance_capped(params, data, m, n_perms, DEFAULT_EXACT_CAP, rng)
}

pub fn check_order_invariance_capped<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    m: usize,
    n_perms: usize,
    cap: usize,
    rng: &mut R,
) -> Result<InvarianceReport, EvalError> {
    if m > params.units() {
        return Err(EvalError::Invalid(format!(
            "cannot permute {m} units of a model with {}",
            params.units()
        )));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let enumerable = params.visible() <= cap;
    let mut max_mass = f64::NEG_INFINITY;
    let mut sum_mass = 0.0;
    let mut lls = Vec::new();
    for _ in 0..n_perms {
        let q = params.apply_permutation(&Permutation::sample(m, rng))?;
        for v in data.examples() {
            let mass = q.z_posterior(v, None)?.ln_prob_at_most(m);
            max_mass = max_mass.max(mass);
            sum_mass += mass;
        }
        if enumerable {
            let log_z = super::exact::exact_log_partition(&q, cap)?;
            lls.push(mean_loglik_given_partition(&q, data, log_z)?);
        }
    }
    let spread = (enumerable && !lls.is_empty()).then(|| {
        let hi = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = lls.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    });
    let count = (n_perms * data.len()).max(1) as f64;
    Ok(InvarianceReport {
        m,
        n_perms,
        max_log_mass: max_mass,
        mean_log_mass: if m == 0 { f64::NEG_INFINITY } else { sum_mass / count },
        per_permutation_loglik: enumerable.then_some(lls),
        spread,
    })
}

/// The current order followed by `n - 1` uniform reorderings of the first
/// `m` units, so `n = 1` evaluates the model as it stands.
pub fn sample_orders<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Vec<Permutation> {
    let mut out = Vec::with_capacity(n);
    if n > 0 {
        out.push(Permutation::identity(m));
    }
    out.extend((1..n).map(|_| Permutation::sample(m, rng)));
    out
}

/// Mean over examples of `ln (1/N) sum_k p(v_n | order_k)`.
pub fn permutation_averaged_loglik<R: Rng + ?Sized>(
    params: &ModelParams,
    data: &Dataset,
    orders: &[Permutation],
    method: &PartitionMethod,
    rng: &mut R,
) -> Result<f64, EvalError> {
    if orders.is_empty() {
        return Err(EvalError::Invalid("at least one ordering is required".into()));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut per_example = vec![Vec::with_capacity(orders.len()); data.len()];
    for perm in orders {
        let q = params.apply_permutation(perm)?;
        let log_z = log_partition(&q, method, rng)?;
        for (n, v) in data.examples().iter().enumerate() {
            per_example[n].push(q.z_posterior(v, None)?.log_norm() - log_z);
        }
    }
    Ok(per_example.iter().map(|l| log_mean_exp(l)).sum::<f64>() / data.len() as f64)
}

/// Mean over examples of `ln (1/N) sum_k p(y_n | v_n; order_k)`.
pub fn permutation_averaged_condlik(
    params: &ModelParams,
    data: &Dataset,
    orders: &[Permutation],
) -> Result<f64, EvalError> {
    let labels = data.labels().ok_or(EvalError::MissingLabels)?;
    if orders.is_empty() {
        return Err(EvalError::Invalid("at least one ordering is required".into()));
    }
    if data.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let models = orders
        .iter()
        .map(|p| params.apply_permutation(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = 0.0;
    for (v, y) in data.examples().iter().zip(labels) {
        let terms = models
            .iter()
            .map(|q| Ok(q.log_cond_y_given_v(v)?[y.index()]))
            .collect::<Result<Vec<f64>, EvalError>>()?;
        total += log_mean_exp(&terms);
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::evaluation::exact::exact_loglik;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_vectors(d: usize) -> Dataset {
        let ex = (0..1usize << d)
            .map(|k| (0..d).map(|j| ((k >> j) & 1) as u8).collect())
            .collect();
        Dataset::new(ex, None, d, 0, Split::Test).unwrap()
    }

    /// Units after the first `m` carry a huge bias, so for every `v` the
    /// cutoff lands past the permuted block.
    fn dominated(d: usize, m: usize, l: usize, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p =
            ModelParams::random_uniform(d, 0, l, 0.5, PenaltyConfig::default(), &mut rng).unwrap();
        for i in m..l {
            p.hidden_bias_mut()[i] = 40.0;
        }
        p
    }

    #[test]
    fn dominated_units_are_order_free() {
        let p = dominated(4, 3, 5, 1);
        let data = all_vectors(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rep = check_order_invariance(&p, &data, 3, 10, &mut rng).unwrap();
        assert!(rep.max_log_mass < -30.0, "{}", rep.max_log_mass);
        assert!(rep.spread.unwrap() < 1e-10);
        assert!(rep.mean_log_mass <= rep.max_log_mass);
    }

    #[test]
    fn no_permutation_means_no_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::random_uniform(3, 0, 3, 2.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let rep = check_order_invariance(&p, &all_vectors(3), 0, 5, &mut rng).unwrap();
        assert_eq!(rep.spread, Some(0.0));
        assert_eq!(rep.max_log_mass, f64::NEG_INFINITY);
    }

    #[test]
    fn ordinary_model_is_order_sensitive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::random_uniform(4, 0, 4, 3.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let rep = check_order_invariance(&p, &all_vectors(4), 4, 10, &mut rng).unwrap();
        assert!(rep.max_log_mass > -5.0);
        assert!(rep.spread.unwrap() > 1e-3);
    }

    #[test]
    fn rejects_m_beyond_units() {
        let p = ModelParams::zeros(2, 0, 2, PenaltyConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(check_order_invariance(&p, &all_vectors(2), 3, 1, &mut rng).is_err());
    }

    #[test]
    fn single_order_is_plain_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ModelParams::random_uniform(4, 0, 3, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let data = all_vectors(4).subset(&[1, 5, 9]);
        let orders = sample_orders(3, 1, &mut rng);
        let method = PartitionMethod::Exact { cap: 14 };
        let avg = permutation_averaged_loglik(&p, &data, &orders, &method, &mut rng).unwrap();
        assert!((avg - exact_loglik(&p, &data, 14).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn invariant_model_agrees_across_order_counts() {
        let p = dominated(4, 3, 5, 8);
        let data = all_vectors(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let method = PartitionMethod::Exact { cap: 14 };
        let one = permutation_averaged_loglik(&p, &data, &sample_orders(3, 1, &mut rng), &method, &mut rng)
            .unwrap();
        let five = permutation_averaged_loglik(&p, &data, &sample_orders(3, 5, &mut rng), &method, &mut rng)
            .unwrap();
        assert!((one - five).abs() < 1e-8);
    }

    #[test]
    fn averages_probabilities_not_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let p = ModelParams::random_uniform(4, 0, 4, 3.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let data = all_vectors(4);
        let orders = sample_orders(4, 5, &mut rng);
        let method = PartitionMethod::Exact { cap: 14 };
        let avg = permutation_averaged_loglik(&p, &data, &orders, &method, &mut rng).unwrap();
        let mean_of_logs: f64 = orders
            .iter()
            .map(|o| exact_loglik(&p.apply_permutation(o).unwrap(), &data, 14).unwrap())
            .sum::<f64>()
            / orders.len() as f64;
        assert!(avg >= mean_of_logs - 1e-12);
        assert!(avg > mean_of_logs + 1e-6, "model should be order sensitive");
    }

    #[test]
    fn condlik_single_order_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = ModelParams::random_uniform(3, 2, 3, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let data = Dataset::new(
            vec![vec![1, 0, 1], vec![0, 1, 1]],
            Some(vec![0, 1]),
            3,
            2,
            Split::Test,
        )
        .unwrap();
        let got = permutation_averaged_condlik(&p, &data, &sample_orders(3, 1, &mut rng)).unwrap();
        let want = (p.cond_y_given_v(&[1, 0, 1]).unwrap()[0].ln()
            + p.cond_y_given_v(&[0, 1, 1]).unwrap()[1].ln())
            / 2.0;
        assert!((got - want).abs() < 1e-12);
    }
}
