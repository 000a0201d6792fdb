use super::{Label, ModelError, ModelParams};
use crate::math::{softplus, LN_TWO};

impl ModelParams {
    /// `E(v, h, z)` (or `E(v, h, y, z)` with a label).
    ///
    /// `h` may have any length; every active entry must lie at index `< z`.
    /// Units past `l` contribute only their penalty.
    pub fn energy(
        &self,
        v: &[u8],
        h: &[u8],
        z: usize,
        y: Option<Label>,
    ) -> Result<f64, ModelError> {
        self.check_visible(v)?;
        self.check_label(y)?;
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        if let Some(index) = h.iter().enumerate().skip(z).find(|(_, &b)| b != 0).map(|(i, _)| i) {
            return Err(ModelError::HiddenBeyondCutoff { index: index + 1, z });
        }
        let a = self.activations(v, y);
        let mut e = -self.visible_term(v, y);
        for i in 0..z {
            let hi = f64::from(h.get(i).copied().unwrap_or(0));
            let (ai, beta_i) = if i < self.units() {
                (a[i], self.penalty().unit_penalty(self.hidden_bias()[i]))
            } else {
                (0.0, self.penalty().zero_unit_penalty())
            };
            e -= hi * ai - beta_i;
        }
        Ok(e)
    }

    /// `F(v, z)` (or `F(v, y, z)`), the hidden-marginalized free energy.
    pub fn free_energy(&self, v: &[u8], y: Option<Label>, z: usize) -> Result<f64, ModelError> {
        self.check_visible(v)?;
        self.check_label(y)?;
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        Ok(-self.visible_term(v, y) - self.cumulative_increment(v, y, z))
    }

    /// `G(y, z | v)`: the free energy without the `v . b_v` term.
    pub fn conditional_free_energy(
        &self,
        v: &[u8],
        y: Label,
        z: usize,
    ) -> Result<f64, ModelError> {
        self.check_visible(v)?;
        if !self.is_discriminative() {
            return Err(ModelError::NotDiscriminative);
        }
        self.check_label(Some(y))?;
        if z == 0 {
            return Err(ModelError::ZeroCutoff);
        }
        Ok(-self.label_bias()[y.index()] - self.cumulative_increment(v, Some(y), z))
    }

    /// `sum_{i<=z} (softplus(a_i) - beta_i)`, extended past `l` with the
    /// zero-unit increment `ln 2 - beta ln 2`.
    fn cumulative_increment(&self, v: &[u8], y: Option<Label>, z: usize) -> f64 {
        let a = self.activations(v, y);
        let head = z.min(self.units());
        let mut s = 0.0;
        for i in 0..head {
            s += softplus(a[i]) - self.penalty().unit_penalty(self.hidden_bias()[i]);
        }
        if z > self.units() {
            s += (z - self.units()) as f64 * (LN_TWO - self.penalty().zero_unit_penalty());
        }
        s
    }

    /// `softplus(a_i) - beta_i` for each materialized unit, given activations.
    pub(crate) fn unit_increments(&self, a: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(self.hidden_bias())
            .map(|(&ai, &c)| softplus(ai) - self.penalty().unit_penalty(c))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_model(d: usize, l: usize) -> ModelParams {
        ModelParams::zeros(d, 0, l, PenaltyConfig::default()).unwrap()
    }

    #[test]
    fn zero_model_energy_is_penalty_only() {
        let p = zero_model(3, 2);
        let e1 = p.energy(&[0, 0, 0], &[], 1, None).unwrap();
        assert!((e1 - 1.01 * LN_TWO).abs() < 1e-15);
        assert!((e1 - 0.70007).abs() < 1e-5);
        let e3 = p.energy(&[0, 0, 0], &[0, 0, 0], 3, None).unwrap();
        assert!((e3 - 3.0 * 1.01 * LN_TWO).abs() < 1e-14);
        // The quoted 2.10021 is three times a truncated 0.70007.
        assert!((e3 - 2.10021).abs() < 5e-5);
    }

    #[test]
    fn energy_rejects_bad_inputs() {
        let p = zero_model(3, 2);
        assert_eq!(
            p.energy(&[0, 0], &[], 1, None).unwrap_err(),
            ModelError::VisibleDim { expected: 3, got: 2 }
        );
        assert_eq!(
            p.energy(&[0, 0, 0], &[0, 1], 1, None).unwrap_err(),
            ModelError::HiddenBeyondCutoff { index: 2, z: 1 }
        );
        assert_eq!(p.energy(&[0, 0, 0], &[], 0, None).unwrap_err(), ModelError::ZeroCutoff);
    }

    /// Term-by-term evaluation of the energy with explicit loops.
    fn energy_oracle(p: &ModelParams, v: &[u8], h: &[u8], z: usize) -> f64 {
        let d = p.visible();
        let mut e = 0.0;
        for j in 0..d {
            e -= f64::from(v[j]) * p.visible_bias()[j];
        }
        for i in 0..z {
            let mut act = 0.0;
            let mut beta = 1.01 * LN_TWO;
            if i < p.units() {
                for j in 0..d {
                    act += p.weights()[i * d + j] * f64::from(v[j]);
                }
                act += p.hidden_bias()[i];
                beta = p.penalty().unit_penalty(p.hidden_bias()[i]);
            }
            e -= f64::from(h[i]) * act;
            e += beta;
        }
        e
    }

    #[test]
    fn seeded_energy_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = ModelParams::random_uniform(3, 0, 2, 1.5, PenaltyConfig::default(), &mut rng)
            .unwrap();
        for z in 1..=4 {
            for vbits in 0..8u32 {
                let v: Vec<u8> = (0..3).map(|j| ((vbits >> j) & 1) as u8).collect();
                for hbits in 0..(1u32 << z) {
                    let h: Vec<u8> = (0..z).map(|i| ((hbits >> i) & 1) as u8).collect();
                    let got = p.energy(&v, &h, z, None).unwrap();
                    let want = energy_oracle(&p, &v, &h, z);
                    assert!((got - want).abs() < 1e-12, "z={z} v={v:?} h={h:?}");
                }
            }
        }
    }

    #[test]
    fn zero_model_free_energy_is_linear_in_z() {
        let p = zero_model(4, 2);
        for z in 1..6 {
            let f = p.free_energy(&[1, 0, 1, 1], None, z).unwrap();
            assert!((f - z as f64 * 0.01 * LN_TWO).abs() < 1e-14);
            assert!((f - 0.0069315 * z as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn free_energy_tail_adds_zero_unit_increment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ModelParams::random_uniform(4, 0, 3, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let v = [0, 1, 1, 0];
        let fl = p.free_energy(&v, None, 3).unwrap();
        for k in 1..5 {
            let f = p.free_energy(&v, None, 3 + k).unwrap();
            assert!((f - fl - k as f64 * 0.01 * LN_TWO).abs() < 1e-13);
        }
    }

    #[test]
    fn free_energy_matches_hidden_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = ModelParams::random_uniform(4, 0, 3, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let v = [1, 0, 1, 1];
        for z in 1..=5 {
            let sum: f64 = (0..(1u32 << z))
                .map(|bits| {
                    let h: Vec<u8> = (0..z).map(|i| ((bits >> i) & 1) as u8).collect();
                    (-p.energy(&v, &h, z, None).unwrap()).exp()
                })
                .sum();
            let f = p.free_energy(&v, None, z).unwrap();
            assert!((f + sum.ln()).abs() < 1e-12, "z={z}");
        }
    }

    #[test]
    fn conditional_free_energy_drops_visible_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = ModelParams::random_uniform(4, 3, 3, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let v = [1, 1, 0, 1];
        let y = Label::new(1, 3).unwrap();
        let f = p.free_energy(&v, Some(y), 2).unwrap();
        let g = p.conditional_free_energy(&v, y, 2).unwrap();
        let vb: f64 = p.visible_bias()[0] + p.visible_bias()[1] + p.visible_bias()[3];
        assert!((f + vb - g).abs() < 1e-13);
        let unlabeled = zero_model(4, 1);
        assert_eq!(
            unlabeled.conditional_free_energy(&v, y, 1).unwrap_err(),
            ModelError::NotDiscriminative
        );
    }
}
