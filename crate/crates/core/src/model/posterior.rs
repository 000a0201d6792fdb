use rand::Rng;

use super::{Label, ModelError, ModelParams};
use crate::math::{ln_geometric_tail, log_add_exp, log_sum_exp};

/// Posterior over the cutoff `z` given `v` (and optionally `y`).
///
/// `head_log_weights[k]` is `-F(v, z = k + 1)` for `z = 1 ..= l + 1`. The mass
/// of every `z > l + 1` is a geometric series summed in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPosterior {
    head_log_weights: Vec<f64>,
    tail_log_mass: f64,
    log_norm: f64,
    ln_ratio: f64,
    /// `log sum_{z >= k + 1}` for `k = 0 ..= l + 1` (last entry is the tail).
    suffix: Vec<f64>,
}

impl ZPosterior {
    pub(crate) fn from_head(head_log_weights: Vec<f64>, ln_ratio: f64) -> Self {
        let last = *head_log_weights.last().expect("head holds at least z = 1, 2");
        let tail_log_mass = last + ln_geometric_tail(ln_ratio);
        let n = head_log_weights.len();
        let mut suffix = vec![0.0; n + 1];
        suffix[n] = tail_log_mass;
        for k in (0..n).rev() {
            suffix[k] = log_add_exp(head_log_weights[k], suffix[k + 1]);
        }
        Self {
            log_norm: suffix[0],
            head_log_weights,
            tail_log_mass,
            ln_ratio,
            suffix,
        }
    }

    /// `log e^{-F(v, z)}` for `z = 1 ..= l + 1`.
    pub fn head_log_weights(&self) -> &[f64] {
        &self.head_log_weights
    }

    /// `log sum_{z > l + 1} e^{-F(v, z)}`.
    pub fn tail_log_mass(&self) -> f64 {
        self.tail_log_mass
    }

    /// `log sum_{z >= 1} e^{-F(v, z)}`, i.e. the unnormalized log marginal.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Number of materialized units `l` the posterior was built from.
    pub fn units(&self) -> usize {
        self.head_log_weights.len() - 1
    }

    /// `ln p(z | ...)` for any `z >= 1`.
    pub fn log_prob(&self, z: usize) -> f64 {
        assert!(z >= 1, "z is 1-based");
        let n = self.head_log_weights.len();
        if z <= n {
            self.head_log_weights[z - 1] - self.log_norm
        } else {
            self.head_log_weights[n - 1] + (z - n) as f64 * self.ln_ratio - self.log_norm
        }
    }

    pub fn prob(&self, z: usize) -> f64 {
        self.log_prob(z).exp()
    }

    /// `p(z)` for `z = 1 ..= l + 1`.
    pub fn head_probs(&self) -> Vec<f64> {
        self.head_log_weights
            .iter()
            .map(|&w| (w - self.log_norm).exp())
            .collect()
    }

    /// `p(z > l + 1)`.
    pub fn tail_prob(&self) -> f64 {
        (self.tail_log_mass - self.log_norm).exp()
    }

    /// `ln p(z >= i)` for `i >= 1`.
    pub fn ln_prob_at_least(&self, i: usize) -> f64 {
        assert!(i >= 1, "z is 1-based");
        let n = self.head_log_weights.len();
        if i <= n + 1 {
            self.suffix[i - 1] - self.log_norm
        } else {
            // Beyond the head the survival function is geometric.
            self.suffix[n] + (i - n - 1) as f64 * self.ln_ratio - self.log_norm
        }
    }

    pub fn prob_at_least(&self, i: usize) -> f64 {
        self.ln_prob_at_least(i).exp()
    }

    /// `p(z >= i)` for `i = 1 ..= l + 1`.
    pub fn survival(&self) -> Vec<f64> {
        (1..=self.head_log_weights.len())
            .map(|i| self.prob_at_least(i))
            .collect()
    }

    /// `ln p(z <= m)`, `-inf` for `m = 0`.
    pub fn ln_prob_at_most(&self, m: usize) -> f64 {
        if m == 0 {
            return f64::NEG_INFINITY;
        }
        let n = self.head_log_weights.len();
        if m <= n {
            log_sum_exp(&self.head_log_weights[..m]) - self.log_norm
        } else {
            (-self.ln_prob_at_least(m + 1).exp()).ln_1p()
        }
    }

    /// Mode of `p(z)` over `z = 1 ..= l + 1`, tail excluded; ties go low.
    pub fn argmax_head(&self) -> usize {
        crate::math::argmax(&self.head_log_weights) + 1
    }

    /// Mode over `z = 1 ..= l + 1` with the tail mass pooled into `l + 1`.
    pub fn argmax_pooled(&self) -> usize {
        let mut w = self.head_log_weights.clone();
        let last = w.len() - 1;
        w[last] = self.suffix[last];
        crate::math::argmax(&w) + 1
    }

    /// Draws `z` from the full posterior; draws landing beyond `l + 1` are
    /// clamped to `l + 1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, &w) in self.head_log_weights.iter().enumerate() {
            acc += (w - self.log_norm).exp();
            if u < acc {
                return k + 1;
            }
        }
        self.head_log_weights.len()
    }
}

impl ModelParams {
    /// Posterior `p(z | v)` or `p(z | v, y)`.
    ///
    /// Without a label on a discriminative model the label is summed out, so
    /// this is `p(z | v) = sum_y p(z, y | v)`.
    pub fn z_posterior(&self, v: &[u8], y: Option<Label>) -> Result<ZPosterior, ModelError> {
        self.check_visible(v)?;
        self.check_label(y)?;
        Ok(self.z_posterior_unchecked(v, y))
    }

    pub(crate) fn z_posterior_unchecked(&self, v: &[u8], y: Option<Label>) -> ZPosterior {
        let base = self.input_activations(v);
        self.z_posterior_from_input(v, &base, y)
    }

    /// As [`Self::z_posterior`] but reusing precomputed `W_i . v + c_i`.
    pub(crate) fn z_posterior_from_input(
        &self,
        v: &[u8],
        input: &[f64],
        y: Option<Label>,
    ) -> ZPosterior {
        let ln_r = self.penalty().ln_tail_ratio();
        let head = match y {
            Some(y) => self.cumulative_head(input, Some(y), self.visible_term(v, Some(y))),
            None if !self.is_discriminative() => {
                self.cumulative_head(input, None, self.visible_term(v, None))
            }
            None => {
                let vb = self.visible_term(v, None);
                let per_label: Vec<Vec<f64>> = (0..self.classes())
                    .map(|k| {
                        let y = Label::from_index(k);
                        self.cumulative_head(input, Some(y), vb + self.label_bias()[k])
                    })
                    .collect();
                let mut buf = vec![0.0; self.classes()];
                (0..=self.units())
                    .map(|z| {
                        for (k, h) in per_label.iter().enumerate() {
                            buf[k] = h[z];
                        }
                        log_sum_exp(&buf)
                    })
                    .collect()
            }
        };
        ZPosterior::from_head(head, ln_r)
    }

    /// `offset + sum_{i<=z} (softplus(a_i) - beta_i)` for `z = 1 ..= l + 1`.
    fn cumulative_head(&self, input: &[f64], y: Option<Label>, offset: f64) -> Vec<f64> {
        let mut a = input.to_vec();
        if let Some(y) = y {
            self.add_label_activation(&mut a, y);
        }
        let inc = self.unit_increments(&a);
        let mut head = Vec::with_capacity(self.units() + 1);
        let mut acc = offset;
        for d in inc {
            acc += d;
            head.push(acc);
        }
        head.push(acc + self.penalty().ln_tail_ratio());
        head
    }
}
