//! Finite-difference checks of the analytic gradients on sampled coordinates.

use rand::Rng;
use serde::Serialize;

use super::exact::{exact_log_partition, exact_nll_gradient};
use super::EvalError;
use crate::model::{Label, ModelParams};
use crate::training::grad_discriminative_exact;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub coordinates: usize,
    /// Max relative error of `d(-ln p(v))`; absent when `D` is not enumerable.
    pub generative: Option<f64>,
    /// Max relative error of `d(-ln p(y | v))`; absent without labels.
    pub discriminative: Option<f64>,
}

/// `|a - n| / max(|a|, |n|, 1e-3)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

fn max_error<F>(
    params: &ModelParams,
    analytic: &[f64],
    coords: &[usize],
    h: f64,
    mut loss: F,
) -> Result<f64, EvalError>
where
    F: FnMut(&ModelParams) -> Result<f64, EvalError>,
{
    let base = params.to_flat();
    let mut q = params.clone();
    let mut worst = 0.0f64;
    for &k in coords {
        let mut x = base.clone();
        x[k] = base[k] + h;
        q.set_flat(&x)?;
        let up = loss(&q)?;
        x[k] = base[k] - h;
        q.set_flat(&x)?;
        let down = loss(&q)?;
        worst = worst.max(relative_error(analytic[k], (up - down) / (2.0 * h)));
    }
    Ok(worst)
}

/// Compares analytic and central-difference gradients on `n_coords` random
/// flat coordinates (all of them when `n_coords` is at least the parameter
/// count).
pub fn gradient_check<R: Rng + ?Sized>(
    params: &ModelParams,
    examples: &[&[u8]],
    labels: Option<&[Label]>,
    n_coords: usize,
    h: f64,
    cap: usize,
    rng: &mut R,
) -> Result<GradCheckReport, EvalError> {
    if examples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let n = params.n_params();
    let coords: Vec<usize> = if n_coords >= n {
        (0..n).collect()
    } else {
        (0..n_coords).map(|_| rng.random_range(0..n)).collect()
    };
    let count = examples.len() as f64;

    let generative = if params.visible() <= cap {
        let g = exact_nll_gradient(params, examples, None, cap)?.to_flat();
        Some(max_error(params, &g, &coords, h, |q| {
            let log_z = exact_log_partition(q, cap)?;
            let mut s = 0.0;
            for v in examples {
                s -= q.z_posterior(v, None)?.log_norm() - log_z;
            }
            Ok(s / count)
        })?)
    } else {
        None
    };

    let discriminative = match labels {
        Some(ls) if params.is_discriminative() => {
            let g = grad_discriminative_exact(params, examples, ls)?.to_flat();
            Some(max_error(params, &g, &coords, h, |q| {
                let mut s = 0.0;
                for (v, y) in examples.iter().zip(ls) {
                    s -= q.log_cond_y_given_v(v)?[y.index()];
                }
                Ok(s / count)
            })?)
        }
        _ => None,
    };
    Ok(GradCheckReport {
        coordinates: coords.len(),
        generative,
        discriminative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PenaltyConfig, PenaltyMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_gradients_pass_on_tiny_models() {
        for (seed, mode) in [(0, PenaltyMode::Constant), (1, PenaltyMode::Dynamic)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pen = PenaltyConfig::new(1.01, mode).unwrap();
            let p = ModelParams::random_uniform(4, 2, 3, 1.0, pen, &mut rng).unwrap();
            let data: Vec<Vec<u8>> = vec![vec![1, 0, 1, 1], vec![0, 0, 1, 0], vec![1, 1, 1, 1]];
            let refs: Vec<&[u8]> = data.iter().map(|v| v.as_slice()).collect();
            let labels = [Label::new(0, 2).unwrap(), Label::new(1, 2).unwrap(), Label::new(1, 2).unwrap()];
            let rep = gradient_check(&p, &refs, Some(&labels), usize::MAX, 1e-5, 14, &mut rng).unwrap();
            assert_eq!(rep.coordinates, p.n_params());
            assert!(rep.generative.unwrap() < 1e-6, "{rep:?}");
            assert!(rep.discriminative.unwrap() < 1e-6, "{rep:?}");
        }
    }

    #[test]
    fn relative_error_has_a_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-9, 0.0) - 1e-6).abs() < 1e-18);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
