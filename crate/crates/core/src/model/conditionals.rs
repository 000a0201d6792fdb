use serde::Serialize;

use super::{Label, ModelError, ModelParams, ZPosterior};
use crate::math::{log_sum_exp, sigmoid, softmax};

/// Per-unit view of how strongly each hidden unit is gated by the units to
/// its left: `p(z >= i | v)` and `p(h_i = 1 | v)` for `i = 1 ..= l + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingDiagnostic {
    pub survival: Vec<f64>,
    pub marginal_activation: Vec<f64>,
    /// `p(z = l | v)`.
    pub prob_at_last_unit: f64,
    /// `p(z > l | v)`, the mass carried by zero-parameter units.
    pub zero_unit_mass: f64,
}

impl ModelParams {
    fn check_cutoff(&self, z: usize) -> Result<(), ModelError> {
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        if z > self.units() + 1 {
            return Err(ModelError::CutoffRange {
                z,
                max: self.units() + 1,
            });
        }
        Ok(())
    }

    /// `p(h_i = 1 | v, z[, y])` for `i = 1 ..= z`; units past `z` are off.
    pub fn cond_h_given_vz(
        &self,
        v: &[u8],
        z: usize,
        y: Option<Label>,
    ) -> Result<Vec<f64>, ModelError> {
        self.check_visible(v)?;
        self.check_label(y)?;
        self.check_cutoff(z)?;
        let a = self.activations(v, y);
        Ok((0..z)
            .map(|i| if i < self.units() { sigmoid(a[i]) } else { 0.5 })
            .collect())
    }

    /// `p(v_j = 1 | h, z)`. Entries of `h` at index `>= z` are ignored.
    pub fn cond_v_given_hz(&self, h: &[u8], z: usize) -> Result<Vec<f64>, ModelError> {
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        Ok(self.visible_logits(h, z).into_iter().map(sigmoid).collect())
    }

    pub(crate) fn visible_logits(&self, h: &[u8], z: usize) -> Vec<f64> {
        let mut logits = self.visible_bias().to_vec();
        let active = z.min(self.units()).min(h.len());
        for i in 0..active {
            if h[i] != 0 {
                for (l, &w) in logits.iter_mut().zip(self.unit_weights(i)) {
                    *l += w;
                }
            }
        }
        logits
    }

    /// `p(y | h, z)`.
    pub fn cond_y_given_hz(&self, h: &[u8], z: usize) -> Result<Vec<f64>, ModelError> {
        if !self.is_discriminative() {
            return Err(ModelError::NotDiscriminative);
        }
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        Ok(softmax(&self.label_logits(h, z)))
    }

    pub(crate) fn label_logits(&self, h: &[u8], z: usize) -> Vec<f64> {
        let mut logits = self.label_bias().to_vec();
        let active = z.min(self.units()).min(h.len());
        for i in 0..active {
            if h[i] != 0 {
                for (l, &u) in logits.iter_mut().zip(self.unit_label_weights(i)) {
                    *l += u;
                }
            }
        }
        logits
    }

    /// One posterior `p(z | v, y)` per class, sharing the `W v` product.
    ///
    /// Each `log_norm` is `log sum_z e^{-F(v, y, z)}`, so their softmax over
    /// `y` is `p(y | v)`.
    pub fn label_posteriors(&self, v: &[u8]) -> Result<Vec<ZPosterior>, ModelError> {
        self.check_visible(v)?;
        if !self.is_discriminative() {
            return Err(ModelError::NotDiscriminative);
        }
        Ok(self.label_posteriors_unchecked(v))
    }

    pub(crate) fn label_posteriors_unchecked(&self, v: &[u8]) -> Vec<ZPosterior> {
        let input = self.input_activations(v);
        (0..self.classes())
            .map(|k| self.z_posterior_from_input(v, &input, Some(Label::from_index(k))))
            .collect()
    }

    /// `ln p(y | v)` for every class.
    pub fn log_cond_y_given_v(&self, v: &[u8]) -> Result<Vec<f64>, ModelError> {
        let posts = self.label_posteriors(v)?;
        Ok(log_label_probs(&posts))
    }

    /// `p(y | v)`, marginalizing both `h` and `z`.
    pub fn cond_y_given_v(&self, v: &[u8]) -> Result<Vec<f64>, ModelError> {
        Ok(self
            .log_cond_y_given_v(v)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    /// `p(h_i = 1 | v)` for 1-based `i`, including the gating factor
    /// `p(z >= i | v)`.
    pub fn marginal_h_prob(&self, v: &[u8], i: usize) -> Result<f64, ModelError> {
        self.check_visible(v)?;
        if i == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        Ok(self.marginal_h_probs_upto(v, i)[i - 1])
    }

    fn marginal_h_probs_upto(&self, v: &[u8], n: usize) -> Vec<f64> {
        let input = self.input_activations(v);
        let act = |a: &[f64], i: usize| if i < self.units() { sigmoid(a[i]) } else { 0.5 };
        if !self.is_discriminative() {
            let post = self.z_posterior_from_input(v, &input, None);
            return (0..n)
                .map(|i| act(&input, i) * post.prob_at_least(i + 1))
                .collect();
        }
        let posts: Vec<ZPosterior> = (0..self.classes())
            .map(|k| self.z_posterior_from_input(v, &input, Some(Label::from_index(k))))
            .collect();
        let py: Vec<f64> = log_label_probs(&posts).into_iter().map(f64::exp).collect();
        let mut out = vec![0.0; n];
        for (k, post) in posts.iter().enumerate() {
            let mut a = input.clone();
            self.add_label_activation(&mut a, Label::from_index(k));
            for (i, o) in out.iter_mut().enumerate() {
                *o += py[k] * act(&a, i) * post.prob_at_least(i + 1);
            }
        }
        out
    }

    pub fn ordering_diagnostic(&self, v: &[u8]) -> Result<OrderingDiagnostic, ModelError> {
        self.check_visible(v)?;
        let l = self.units();
        let post = self.z_posterior_unchecked(v, None);
        Ok(OrderingDiagnostic {
            survival: post.survival(),
            marginal_activation: self.marginal_h_probs_upto(v, l + 1),
            prob_at_last_unit: post.prob(l),
            zero_unit_mass: post.prob_at_least(l + 1),
        })
    }
}

pub(crate) fn log_label_probs(posts: &[ZPosterior]) -> Vec<f64> {
    let norms: Vec<f64> = posts.iter().map(ZPosterior::log_norm).collect();
    let total = log_sum_exp(&norms);
    norms.into_iter().map(|n| n - total).collect()
}
