use rand::Rng;
use serde::Serialize;

use super::{Label, ModelError, PenaltyConfig};
use crate::math::dot_binary;

/// Names one block of parameters, for error reports and flat-vector layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamBlock {
    Weights,
    VisibleBias,
    HiddenBias,
    LabelWeights,
    LabelBias,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 5] = [
        ParamBlock::Weights,
        ParamBlock::VisibleBias,
        ParamBlock::HiddenBias,
        ParamBlock::LabelWeights,
        ParamBlock::LabelBias,
    ];
}

impl std::fmt::Display for ParamBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ParamBlock::Weights => "W",
            ParamBlock::VisibleBias => "b_v",
            ParamBlock::HiddenBias => "c",
            ParamBlock::LabelWeights => "U",
            ParamBlock::LabelBias => "d",
        };
        f.write_str(name)
    }
}

/// All learnable quantities of a (discriminative) iRBM with `l` materialized
/// hidden units.
///
/// Storage is hidden-unit-major: row `i` of `W` (length `D`) and of `U`
/// (length `C`) are contiguous, so reordering units is a row shuffle.
/// A purely generative model has `C = 0` and empty `U`, `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    visible: usize,
    classes: usize,
    units: usize,
    w: Vec<f64>,
    bv: Vec<f64>,
    hb: Vec<f64>,
    u: Vec<f64>,
    ld: Vec<f64>,
    penalty: PenaltyConfig,
}

impl ModelParams {
    pub fn zeros(
        visible: usize,
        classes: usize,
        units: usize,
        penalty: PenaltyConfig,
    ) -> Result<Self, ModelError> {
        if units == 0 {
            return Err(ModelError::NoUnits);
        }
        Ok(Self {
            visible,
            classes,
            units,
            w: vec![0.0; units * visible],
            bv: vec![0.0; visible],
            hb: vec![0.0; units],
            u: vec![0.0; units * classes],
            ld: vec![0.0; classes],
            penalty,
        })
    }

    /// Every parameter drawn uniformly from `[-scale, scale]`.
    pub fn random_uniform<R: Rng + ?Sized>(
        visible: usize,
        classes: usize,
        units: usize,
        scale: f64,
        penalty: PenaltyConfig,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        let mut p = Self::zeros(visible, classes, units, penalty)?;
        for x in p
            .w
            .iter_mut()
            .chain(p.bv.iter_mut())
            .chain(p.hb.iter_mut())
            .chain(p.u.iter_mut())
            .chain(p.ld.iter_mut())
        {
            *x = rng.random_range(-scale..=scale);
        }
        Ok(p)
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Number of materialized hidden units `l`.
    pub fn units(&self) -> usize {
        self.units
    }

    pub fn is_discriminative(&self) -> bool {
        self.classes > 0
    }

    pub fn penalty(&self) -> PenaltyConfig {
        self.penalty
    }

    pub fn set_penalty(&mut self, penalty: PenaltyConfig) {
        self.penalty = penalty;
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.bv
    }

    pub fn visible_bias_mut(&mut self) -> &mut [f64] {
        &mut self.bv
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hb
    }

    pub fn hidden_bias_mut(&mut self) -> &mut [f64] {
        &mut self.hb
    }

    pub fn label_weights(&self) -> &[f64] {
        &self.u
    }

    pub fn label_weights_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn label_bias(&self) -> &[f64] {
        &self.ld
    }

    pub fn label_bias_mut(&mut self) -> &mut [f64] {
        &mut self.ld
    }

    /// Row `W_i` (0-based).
    pub fn unit_weights(&self, i: usize) -> &[f64] {
        &self.w[i * self.visible..(i + 1) * self.visible]
    }

    pub fn unit_weights_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.visible;
        &mut self.w[i * d..(i + 1) * d]
    }

    /// Row `U_i` (0-based).
    pub fn unit_label_weights(&self, i: usize) -> &[f64] {
        &self.u[i * self.classes..(i + 1) * self.classes]
    }

    pub fn block(&self, block: ParamBlock) -> &[f64] {
        match block {
            ParamBlock::Weights => &self.w,
            ParamBlock::VisibleBias => &self.bv,
            ParamBlock::HiddenBias => &self.hb,
            ParamBlock::LabelWeights => &self.u,
            ParamBlock::LabelBias => &self.ld,
        }
    }

    pub fn block_mut(&mut self, block: ParamBlock) -> &mut [f64] {
        match block {
            ParamBlock::Weights => &mut self.w,
            ParamBlock::VisibleBias => &mut self.bv,
            ParamBlock::HiddenBias => &mut self.hb,
            ParamBlock::LabelWeights => &mut self.u,
            ParamBlock::LabelBias => &mut self.ld,
        }
    }

    pub fn check_visible(&self, v: &[u8]) -> Result<(), ModelError> {
        if v.len() != self.visible {
            return Err(ModelError::VisibleDim {
                expected: self.visible,
                got: v.len(),
            });
        }
        if let Some((index, &value)) = v.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(ModelError::NonBinary { index, value });
        }
        Ok(())
    }

    pub fn check_label(&self, y: Option<Label>) -> Result<(), ModelError> {
        match y {
            None => Ok(()),
            Some(_) if self.classes == 0 => Err(ModelError::NotDiscriminative),
            Some(y) if y.index() >= self.classes => Err(ModelError::LabelRange {
                label: y.index(),
                classes: self.classes,
            }),
            Some(_) => Ok(()),
        }
    }

    /// `W_i . v + c_i` for every materialized unit.
    pub fn input_activations(&self, v: &[u8]) -> Vec<f64> {
        (0..self.units)
            .map(|i| dot_binary(self.unit_weights(i), v) + self.hb[i])
            .collect()
    }

    /// `W_i . v + U_i . e_y + c_i` for every materialized unit.
    pub fn activations(&self, v: &[u8], y: Option<Label>) -> Vec<f64> {
        let mut a = self.input_activations(v);
        if let Some(y) = y {
            self.add_label_activation(&mut a, y);
        }
        a
    }

    pub(crate) fn add_label_activation(&self, a: &mut [f64], y: Label) {
        let c = self.classes;
        for (i, ai) in a.iter_mut().enumerate() {
            *ai += self.u[i * c + y.index()];
        }
    }

    /// `v . b_v + d_y` (the `d_y` term only when a label is given).
    pub fn visible_term(&self, v: &[u8], y: Option<Label>) -> f64 {
        dot_binary(&self.bv, v) + y.map_or(0.0, |y| self.ld[y.index()])
    }

    /// Per-unit penalties `beta_i` of the materialized units.
    pub fn unit_penalties(&self) -> Vec<f64> {
        self.hb
            .iter()
            .map(|&c| self.penalty.unit_penalty(c))
            .collect()
    }

    /// Appends unit `l + 1` with all parameters zero.
    pub fn push_zero_unit(&mut self) {
        self.units += 1;
        self.w.resize(self.units * self.visible, 0.0);
        self.hb.push(0.0);
        self.u.resize(self.units * self.classes, 0.0);
    }

    /// Grows the model with zero units until it has at least `units` of them.
    pub fn ensure_units(&mut self, units: usize) {
        while self.units < units {
            self.push_zero_unit();
        }
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.bv.len() + self.hb.len() + self.u.len() + self.ld.len()
    }

    /// All parameters concatenated in `ParamBlock::ALL` order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for block in ParamBlock::ALL {
            out.extend_from_slice(self.block(block));
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), ModelError> {
        if flat.len() != self.n_params() {
            return Err(ModelError::FlatLength {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for block in ParamBlock::ALL {
            let dst = self.block_mut(block);
            let n = dst.len();
            dst.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Rescales every `W_i` with norm above `w_bound` (and `U_i` above
    /// `u_bound`) onto the bound.
    pub fn project_max_norm(&mut self, w_bound: f64, u_bound: f64) {
        let d = self.visible;
        for row in self.w.chunks_mut(d.max(1)) {
            project_row(row, w_bound);
        }
        if self.classes > 0 {
            for row in self.u.chunks_mut(self.classes) {
                project_row(row, u_bound);
            }
        }
    }

    /// The first block containing a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<ParamBlock> {
        ParamBlock::ALL
            .into_iter()
            .find(|&b| self.block(b).iter().any(|x| !x.is_finite()))
    }
}

fn project_row(row: &mut [f64], bound: f64) {
    let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > bound {
        let scale = bound / norm;
        for x in row.iter_mut() {
            *x *= scale;
        }
        // Rounding can leave the norm a hair above the bound.
        let again = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if again > bound {
            let fix = bound / again * (1.0 - f64::EPSILON);
            for x in row.iter_mut() {
                *x *= fix;
            }
        }
    }
}
