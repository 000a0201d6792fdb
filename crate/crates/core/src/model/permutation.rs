use rand::seq::SliceRandom;
use rand::Rng;

use super::{ModelError, ModelParams};

/// Reordering of the first `M` hidden units; identity beyond `M`.
///
/// `order[k]` (0-based) is the old index of the unit that lands at position
/// `k`, so applying it maps new row `k` to old row `order[k]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        Self {
            order: (0..m).collect(),
        }
    }

    pub fn from_order(order: Vec<usize>) -> Result<Self, ModelError> {
        let mut seen = vec![false; order.len()];
        for &k in &order {
            if k >= order.len() || seen[k] {
                return Err(ModelError::InvalidPermutation(order));
            }
            seen[k] = true;
        }
        Ok(Self { order })
    }

    /// Uniform draw over all `m!` orderings (Fisher–Yates).
    pub fn sample<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        Self { order }
    }

    /// Number of permuted leading units `M`.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(k, &o)| k == o)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order.len()];
        for (k, &o) in self.order.iter().enumerate() {
            inv[o] = k;
        }
        Self { order: inv }
    }

    /// Reorders the leading `M` rows of a row-major buffer with `width`
    /// entries per row.
    pub fn apply_rows<T: Copy>(&self, data: &mut [T], width: usize) {
        if self.is_identity() || width == 0 {
            return;
        }
        let m = self.order.len();
        let old: Vec<T> = data[..m * width].to_vec();
        for (k, &o) in self.order.iter().enumerate() {
            data[k * width..(k + 1) * width].copy_from_slice(&old[o * width..(o + 1) * width]);
        }
    }
}

impl ModelParams {
    /// Copy of the model with its first `M` units reordered.
    pub fn apply_permutation(&self, perm: &Permutation) -> Result<ModelParams, ModelError> {
        let mut out = self.clone();
        out.permute_units(perm)?;
        Ok(out)
    }

    /// Reorders rows of `W`, `U` and entries of `c` in place. Visible and
    /// label biases are untouched.
    pub fn permute_units(&mut self, perm: &Permutation) -> Result<(), ModelError> {
        if perm.len() > self.units() {
            return Err(ModelError::PermutationTooLong {
                len: perm.len(),
                units: self.units(),
            });
        }
        let d = self.visible();
        let c = self.classes();
        perm.apply_rows(self.weights_mut(), d);
        perm.apply_rows(self.hidden_bias_mut(), 1);
        perm.apply_rows(self.label_weights_mut(), c);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        ModelParams::random_uniform(3, 2, 4, 1.0, PenaltyConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn identity_leaves_params_bitwise() {
        let p = model();
        assert_eq!(p.apply_permutation(&Permutation::identity(4)).unwrap(), p);
        assert_eq!(p.apply_permutation(&Permutation::identity(0)).unwrap(), p);
    }

    #[test]
    fn perm_then_inverse_restores() {
        let p = model();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let perm = Permutation::sample(3, &mut rng);
            let q = p.apply_permutation(&perm).unwrap();
            assert_eq!(q.apply_permutation(&perm.inverse()).unwrap(), p);
        }
    }

    #[test]
    fn swap_exchanges_rows() {
        let p = model();
        let q = p
            .apply_permutation(&Permutation::from_order(vec![1, 0]).unwrap())
            .unwrap();
        assert_eq!(q.unit_weights(0), p.unit_weights(1));
        assert_eq!(q.unit_weights(1), p.unit_weights(0));
        assert_eq!(q.unit_weights(2), p.unit_weights(2));
        assert_eq!(q.unit_label_weights(0), p.unit_label_weights(1));
        assert_eq!(q.hidden_bias()[0], p.hidden_bias()[1]);
        assert_eq!(q.visible_bias(), p.visible_bias());
        assert_eq!(q.label_bias(), p.label_bias());
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(Permutation::from_order(vec![0, 0]).is_err());
        assert!(Permutation::from_order(vec![2, 0]).is_err());
        let p = model();
        assert_eq!(
            p.apply_permutation(&Permutation::identity(5)).unwrap_err(),
            ModelError::PermutationTooLong { len: 5, units: 4 }
        );
    }
}
