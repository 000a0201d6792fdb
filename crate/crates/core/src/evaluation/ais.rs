//! Annealed importance sampling for `log Z`.
//!
//! The path runs from a base model whose visible biases are `b0` and whose
//! hidden units are all switched off (so `log Z_0` is closed-form) to the
//! target. At inverse temperature `t` every model term is scaled by `t`, the
//! visible biases interpolate between `b0` and `b_v`, and the unit penalties
//! interpolate between the zero-unit penalty and `beta_i`. Units past `l`
//! keep the same geometric ratio at every temperature, so the tail over `z`
//! stays analytic along the whole path.

use rand::Rng;
use serde::Serialize;

use super::EvalError;
use crate::data::Dataset;
use crate::math::{log_mean_exp, log_sum_exp, sigmoid, softmax, softplus, LN_TWO};
use crate::model::{ModelParams, ZPosterior};

#[derive(Debug, Clone, PartialEq)]
pub struct AisOptions {
    pub n_temps: usize,
    pub n_chains: usize,
    /// Visible biases of the base model; zeros when absent.
    pub base_visible_bias: Option<Vec<f64>>,
    /// Anneal to the classic RBM with `z` fixed at this value instead of the
    /// infinite model.
    pub clamp: Option<usize>,
    pub bootstrap_resamples: usize,
}

impl AisOptions {
    pub fn new(n_temps: usize, n_chains: usize) -> Self {
        Self {
            n_temps,
            n_chains,
            base_visible_bias: None,
            clamp: None,
            bootstrap_resamples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AisEstimate {
    pub log_z: f64,
    /// Bootstrap standard error of `log_z` over chains.
    pub std_err: f64,
    pub log_z_base: f64,
    pub log_weights: Vec<f64>,
}

/// Visible biases matching the (smoothed) per-pixel data means.
pub fn base_rate_bias(data: &Dataset) -> Vec<f64> {
    let n = data.len() as f64;
    data.mean()
        .iter()
        .map(|&m| {
            let p = (m * n + 0.5) / (n + 1.0);
            (p / (1.0 - p)).ln()
        })
        .collect()
}

/// `0`, then `n_temps - 1` points geometrically spaced from `1e-3` to `1`.
pub fn geometric_schedule(n_temps: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let k = n_temps.saturating_sub(1);
    if k == 1 {
        out.push(1.0);
    } else if k > 1 {
        let lo = 1e-3f64.ln();
        for i in 0..k {
            out.push((lo * (1.0 - i as f64 / (k - 1) as f64)).exp());
        }
        out[k] = 1.0;
    }
    out
}

/// AIS estimate of `log Z` with default options and zero base biases.
pub fn ais_log_partition<R: Rng + ?Sized>(
    params: &ModelParams,
    n_temps: usize,
    n_chains: usize,
    rng: &mut R,
) -> Result<AisEstimate, EvalError> {
    ais_with(params, &AisOptions::new(n_temps, n_chains), rng)
}

pub fn ais_with<R: Rng + ?Sized>(
    params: &ModelParams,
    opts: &AisOptions,
    rng: &mut R,
) -> Result<AisEstimate, EvalError> {
    if opts.n_temps < 2 {
        return Err(EvalError::Invalid(format!(
            "AIS needs at least 2 temperatures, got {}",
            opts.n_temps
        )));
    }
    if opts.n_chains == 0 {
        return Err(EvalError::Invalid("AIS needs at least one chain".into()));
    }
    if opts.clamp == Some(0) {
        return Err(EvalError::Invalid("clamped z must be positive".into()));
    }
    let b0 = match &opts.base_visible_bias {
        Some(b) if b.len() != params.visible() => {
            return Err(EvalError::Invalid(format!(
                "base bias has {} entries, model has {} visible units",
                b.len(),
                params.visible()
            )))
        }
        Some(b) => b.clone(),
        None => vec![0.0; params.visible()],
    };
    let path = Path {
        params,
        b0,
        clamp: opts.clamp,
    };
    let temps = geometric_schedule(opts.n_temps);

    let mut log_w = Vec::with_capacity(opts.n_chains);
    for _ in 0..opts.n_chains {
        let mut v: Vec<u8> = path
            .b0
            .iter()
            .map(|&b| u8::from(rng.random::<f64>() < sigmoid(b)))
            .collect();
        let mut w = 0.0;
        for k in 1..temps.len() {
            w += path.log_f(temps[k], &v) - path.log_f(temps[k - 1], &v);
            if k + 1 < temps.len() {
                path.transition(temps[k], &mut v, rng);
            }
        }
        log_w.push(w);
    }
    let bad = log_w.iter().filter(|w| !w.is_finite()).count();
    if bad > 0 {
        return Err(EvalError::NonFiniteWeights { count: bad });
    }

    let log_z_base = path.log_z_base();
    let log_z = log_z_base + log_mean_exp(&log_w);
    let std_err = bootstrap_se(&log_w, opts.bootstrap_resamples, rng);
    Ok(AisEstimate {
        log_z,
        std_err,
        log_z_base,
        log_weights: log_w,
    })
}

fn bootstrap_se<R: Rng + ?Sized>(log_w: &[f64], resamples: usize, rng: &mut R) -> f64 {
    if resamples < 2 || log_w.len() < 2 {
        return 0.0;
    }
    let n = log_w.len();
    let mut buf = vec![0.0; n];
    let est: Vec<f64> = (0..resamples)
        .map(|_| {
            for slot in buf.iter_mut() {
                *slot = log_w[rng.random_range(0..n)];
            }
            log_mean_exp(&buf)
        })
        .collect();
    let mean = est.iter().sum::<f64>() / resamples as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    var.sqrt()
}

struct Path<'a> {
    params: &'a ModelParams,
    b0: Vec<f64>,
    clamp: Option<usize>,
}

/// Per-label unnormalized log marginals of one intermediate model.
enum Weights {
    Infinite(Vec<ZPosterior>),
    Clamped(Vec<f64>, Vec<Vec<f64>>),
}

impl Path<'_> {
    fn label_count(&self) -> usize {
        self.params.classes().max(1)
    }

    fn clamped_units(&self, z: usize) -> usize {
        z.min(self.params.units())
    }

    fn log_z_base(&self) -> f64 {
        let vis: f64 = self.b0.iter().map(|&b| softplus(b)).sum();
        let labels = (self.label_count() as f64).ln();
        let hidden = match self.clamp {
            Some(z) => self.clamped_units(z) as f64 * LN_TWO,
            None => {
                let r = self.params.penalty().ln_tail_ratio().exp();
                (r / (1.0 - r)).ln()
            }
        };
        vis + labels + hidden
    }

    /// Scaled activations `t * a_iy` for every label (a single row when
    /// unlabeled).
    fn scaled_activations(&self, t: f64, v: &[u8]) -> Vec<Vec<f64>> {
        let p = self.params;
        let input = p.input_activations(v);
        if p.is_discriminative() {
            (0..p.classes())
                .map(|k| {
                    let mut a = input.clone();
                    for (i, ai) in a.iter_mut().enumerate() {
                        *ai = t * (*ai + p.label_weights()[i * p.classes() + k]);
                    }
                    a
                })
                .collect()
        } else {
            vec![input.iter().map(|a| t * a).collect()]
        }
    }

    fn label_offset(&self, t: f64, k: usize) -> f64 {
        if self.params.is_discriminative() {
            t * self.params.label_bias()[k]
        } else {
            0.0
        }
    }

    fn weights(&self, t: f64, v: &[u8]) -> Weights {
        let p = self.params;
        let acts = self.scaled_activations(t, v);
        match self.clamp {
            Some(z) => {
                let m = self.clamped_units(z);
                let per_label = acts
                    .iter()
                    .enumerate()
                    .map(|(k, a)| self.label_offset(t, k) + a[..m].iter().map(|&x| softplus(x)).sum::<f64>())
                    .collect();
                Weights::Clamped(per_label, acts)
            }
            None => {
                let pen = p.penalty();
                let beta0 = pen.zero_unit_penalty();
                let ln_r = pen.ln_tail_ratio();
                let posts = acts
                    .iter()
                    .enumerate()
                    .map(|(k, a)| {
                        let mut head = Vec::with_capacity(a.len() + 1);
                        let mut acc = self.label_offset(t, k);
                        for (i, &x) in a.iter().enumerate() {
                            let beta_i = pen.unit_penalty(p.hidden_bias()[i]);
                            acc += softplus(x) - (1.0 - t) * beta0 - t * beta_i;
                            head.push(acc);
                        }
                        head.push(acc + ln_r);
                        ZPosterior::from_head(head, ln_r)
                    })
                    .collect();
                Weights::Infinite(posts)
            }
        }
    }

    fn visible_logit(&self, t: f64, j: usize) -> f64 {
        (1.0 - t) * self.b0[j] + t * self.params.visible_bias()[j]
    }

    fn log_f(&self, t: f64, v: &[u8]) -> f64 {
        let vb: f64 = v
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0)
            .map(|(j, _)| self.visible_logit(t, j))
            .sum();
        let per_label: Vec<f64> = match self.weights(t, v) {
            Weights::Infinite(posts) => posts.iter().map(|q| q.log_norm()).collect(),
            Weights::Clamped(w, _) => w,
        };
        vb + log_sum_exp(&per_label)
    }

    /// One Gibbs sweep `(y, z) | v`, then `h | v, y, z`, then `v | h, z` of
    /// the intermediate model at temperature `t`.
    fn transition<R: Rng + ?Sized>(&self, t: f64, v: &mut [u8], rng: &mut R) {
        let p = self.params;
        let (z, acts) = match self.weights(t, v) {
            Weights::Infinite(posts) => {
                let lw: Vec<f64> = posts.iter().map(|q| q.log_norm()).collect();
                let k = sample_index(&lw, rng);
                let z = posts[k].sample(rng);
                (z, self.scaled_activations(t, v).swap_remove(k))
            }
            Weights::Clamped(lw, mut acts) => {
                let k = sample_index(&lw, rng);
                (self.clamp.unwrap_or(1), acts.swap_remove(k))
            }
        };
        let d = p.visible();
        let mut logits: Vec<f64> = (0..d).map(|j| self.visible_logit(t, j)).collect();
        for (i, &a) in acts.iter().enumerate().take(z.min(p.units())) {
            if rng.random::<f64>() < sigmoid(a) {
                for (lj, w) in logits.iter_mut().zip(p.unit_weights(i)) {
                    *lj += t * w;
                }
            }
        }
        for (x, l) in v.iter_mut().zip(&logits) {
            *x = u8::from(rng.random::<f64>() < sigmoid(*l));
        }
    }
}

fn sample_index<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> usize {
    if log_w.len() == 1 {
        return 0;
    }
    let probs = softmax(log_w);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &q) in probs.iter().enumerate() {
        acc += q;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}
