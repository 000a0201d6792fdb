use crate::model::{ModelParams, ParamBlock, Permutation};

/// A vector with one entry per model parameter, laid out like
/// [`ModelParams`]: gradients, ADAGRAD accumulators, momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBuffer {
    visible: usize,
    classes: usize,
    units: usize,
    blocks: [Vec<f64>; 5],
}

pub type Gradient = ParamBuffer;

fn slot(block: ParamBlock) -> usize {
    match block {
        ParamBlock::Weights => 0,
        ParamBlock::VisibleBias => 1,
        ParamBlock::HiddenBias => 2,
        ParamBlock::LabelWeights => 3,
        ParamBlock::LabelBias => 4,
    }
}

impl ParamBuffer {
    pub fn zeros(visible: usize, classes: usize, units: usize) -> Self {
        Self {
            visible,
            classes,
            units,
            blocks: [
                vec![0.0; units * visible],
                vec![0.0; visible],
                vec![0.0; units],
                vec![0.0; units * classes],
                vec![0.0; classes],
            ],
        }
    }

    pub fn zeros_like(params: &ModelParams) -> Self {
        Self::zeros(params.visible(), params.classes(), params.units())
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn block(&self, block: ParamBlock) -> &[f64] {
        &self.blocks[slot(block)]
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [f64] {
        &mut self.blocks[slot(block)]
    }

    /// Entries per hidden unit for unit-indexed blocks, `None` otherwise.
    pub fn unit_width(&self, block: ParamBlock) -> Option<usize> {
        match block {
            ParamBlock::Weights => Some(self.visible),
            ParamBlock::HiddenBias => Some(1),
            ParamBlock::LabelWeights => Some(self.classes),
            ParamBlock::VisibleBias | ParamBlock::LabelBias => None,
        }
    }

    pub fn add_scaled(&mut self, other: &ParamBuffer, scale: f64) {
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for b in &mut self.blocks {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        ParamBlock::ALL
            .into_iter()
            .flat_map(|b| self.block(b).iter().copied())
            .collect()
    }

    pub fn from_flat_like(params: &ModelParams, flat: &[f64]) -> Self {
        let mut out = Self::zeros_like(params);
        let mut offset = 0;
        for b in ParamBlock::ALL {
            let dst = out.block_mut(b);
            let n = dst.len();
            dst.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .fold(0.0, |m, &x| m.max(x.abs()))
    }

    pub fn first_non_finite(&self) -> Option<ParamBlock> {
        ParamBlock::ALL
            .into_iter()
            .find(|&b| self.block(b).iter().any(|x| !x.is_finite()))
    }

    /// Reorders unit rows exactly as [`ModelParams::permute_units`] does.
    pub fn permute_units(&mut self, perm: &Permutation) {
        for b in [ParamBlock::Weights, ParamBlock::HiddenBias, ParamBlock::LabelWeights] {
            let w = self.unit_width(b).expect("unit block");
            perm.apply_rows(self.block_mut(b), w);
        }
    }

    /// Appends a zero row for a new unit.
    pub fn push_unit(&mut self) {
        self.units += 1;
        let (u, d, c) = (self.units, self.visible, self.classes);
        self.blocks[0].resize(u * d, 0.0);
        self.blocks[2].resize(u, 0.0);
        self.blocks[3].resize(u * c, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PenaltyConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn permutes_in_lockstep_with_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ModelParams::random_uniform(3, 2, 4, 1.0, PenaltyConfig::default(), &mut rng)
            .unwrap();
        let mut buf = ParamBuffer::from_flat_like(&p, &p.to_flat());
        let perm = Permutation::sample(4, &mut rng);
        buf.permute_units(&perm);
        let q = p.apply_permutation(&perm).unwrap();
        assert_eq!(buf.to_flat(), q.to_flat());
        buf.permute_units(&perm.inverse());
        assert_eq!(buf.to_flat(), p.to_flat());
    }

    #[test]
    fn push_unit_matches_model_growth() {
        let mut p = ModelParams::zeros(3, 2, 2, PenaltyConfig::default()).unwrap();
        let mut buf = ParamBuffer::zeros_like(&p);
        p.push_zero_unit();
        buf.push_unit();
        assert_eq!(buf.to_flat().len(), p.n_params());
        assert_eq!(buf.units(), 3);
    }
}
