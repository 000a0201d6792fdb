//! Model parameters and every closed-form quantity of the (discriminative)
//! infinite RBM: energies, free energies, conditionals, and the posterior over
//! the cutoff `z` with its analytic geometric tail.
//!
//! Hidden units beyond the materialized count `l` have zero weights and
//! biases. Each of them multiplies the unnormalized mass by
//! `r = exp(ln 2 - beta ln 2)`, which is what makes the infinite sum over `z`
//! finite for `beta > 1`.

mod conditionals;
mod energy;
mod params;
mod permutation;
mod posterior;

pub use conditionals::OrderingDiagnostic;
pub use params::{ModelParams, ParamBlock};
pub use permutation::Permutation;
pub use posterior::ZPosterior;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{softplus, LN_TWO};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("penalty beta must be finite and > 1 for the hidden-unit sum to converge, got {0}")]
    DivergentPenalty(f64),
    #[error("expected {expected} visible units, got {got}")]
    VisibleDim { expected: usize, got: usize },
    #[error("visible entry {index} is {value}, expected 0 or 1")]
    NonBinary { index: usize, value: u8 },
    #[error("label {label} out of range for {classes} classes")]
    LabelRange { label: usize, classes: usize },
    #[error("model has no label units")]
    NotDiscriminative,
    #[error("cutoff z must be >= 1")]
    ZeroCutoff,
    #[error("cutoff z = {z} exceeds the sampled support l + 1 = {max}")]
    CutoffRange { z: usize, max: usize },
    #[error("hidden unit {index} is active but lies beyond the cutoff z = {z}")]
    HiddenBeyondCutoff { index: usize, z: usize },
    #[error("model needs at least one hidden unit")]
    NoUnits,
    #[error("permutation of length {len} exceeds the {units} materialized units")]
    PermutationTooLong { len: usize, units: usize },
    #[error("not a permutation: {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("parameter vector has length {got}, expected {expected}")]
    FlatLength { expected: usize, got: usize },
}

/// How the per-unit penalty `beta_i` is derived from the hidden bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    /// `beta_i = beta * ln 2` for every unit.
    #[default]
    Constant,
    /// `beta_i = beta * softplus(c_i)`.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    beta: f64,
    mode: PenaltyMode,
}

impl PenaltyConfig {
    pub const DEFAULT_BETA: f64 = 1.01;

    pub fn new(beta: f64, mode: PenaltyMode) -> Result<Self, ModelError> {
        if !(beta.is_finite() && beta > 1.0) {
            return Err(ModelError::DivergentPenalty(beta));
        }
        Ok(Self { beta, mode })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> PenaltyMode {
        self.mode
    }

    /// `beta_i` for a unit with hidden bias `c`.
    #[inline]
    pub fn unit_penalty(&self, c: f64) -> f64 {
        match self.mode {
            PenaltyMode::Constant => self.beta * LN_TWO,
            PenaltyMode::Dynamic => self.beta * softplus(c),
        }
    }

    /// `d beta_i / d c_i`.
    #[inline]
    pub fn unit_penalty_slope(&self, c: f64) -> f64 {
        match self.mode {
            PenaltyMode::Constant => 0.0,
            PenaltyMode::Dynamic => self.beta * crate::math::sigmoid(c),
        }
    }

    /// Penalty of a zero-parameter unit, identical under both modes.
    #[inline]
    pub fn zero_unit_penalty(&self) -> f64 {
        self.beta * LN_TWO
    }

    /// `ln r = ln 2 - beta ln 2`, the per-unit log ratio of the tail.
    #[inline]
    pub fn ln_tail_ratio(&self) -> f64 {
        LN_TWO - self.zero_unit_penalty()
    }
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            beta: Self::DEFAULT_BETA,
            mode: PenaltyMode::Constant,
        }
    }
}

/// A binary visible configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VisibleVector(Vec<u8>);

impl VisibleVector {
    pub fn new(bits: Vec<u8>) -> Result<Self, ModelError> {
        if let Some((index, &value)) = bits.iter().enumerate().find(|(_, &b)| b > 1) {
            return Err(ModelError::NonBinary { index, value });
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.0
    }
}

impl AsRef<[u8]> for VisibleVector {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// A class index in `[0, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label(usize);

impl Label {
    pub fn new(index: usize, classes: usize) -> Result<Self, ModelError> {
        if index >= classes {
            return Err(ModelError::LabelRange {
                label: index,
                classes,
            });
        }
        Ok(Self(index))
    }

    /// Unchecked constructor for indices already known to be in range.
    pub(crate) fn from_index(index: usize) -> Self {
        Self(index)
    }

    pub fn index(self) -> usize {
        self.0
    }

    /// One-hot encoding `e_y` of length `classes`.
    pub fn one_hot(self, classes: usize) -> Vec<f64> {
        let mut e = vec![0.0; classes];
        e[self.0] = 1.0;
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_rejects_non_convergent_beta() {
        assert!(PenaltyConfig::new(1.0, PenaltyMode::Constant).is_err());
        assert!(PenaltyConfig::new(0.5, PenaltyMode::Dynamic).is_err());
        assert!(PenaltyConfig::new(f64::NAN, PenaltyMode::Constant).is_err());
        assert!(PenaltyConfig::new(1.01, PenaltyMode::Constant).is_ok());
    }

    #[test]
    fn tail_ratio_is_below_one() {
        let p = PenaltyConfig::default();
        let r = p.ln_tail_ratio().exp();
        assert!((r - 2f64.powf(-0.01)).abs() < 1e-15);
        assert!(r < 1.0);
    }

    #[test]
    fn dynamic_penalty_of_zero_bias_equals_constant() {
        let c = PenaltyConfig::new(1.3, PenaltyMode::Constant).unwrap();
        let d = PenaltyConfig::new(1.3, PenaltyMode::Dynamic).unwrap();
        assert_eq!(c.unit_penalty(0.0), d.unit_penalty(0.0));
        assert_eq!(d.zero_unit_penalty(), c.zero_unit_penalty());
        assert!(d.unit_penalty(2.0) > c.unit_penalty(2.0));
    }

    #[test]
    fn visible_vector_validates_bits() {
        assert!(VisibleVector::new(vec![0, 1, 1]).is_ok());
        assert_eq!(
            VisibleVector::new(vec![0, 2]).unwrap_err(),
            ModelError::NonBinary { index: 1, value: 2 }
        );
    }

    #[test]
    fn label_range_and_one_hot() {
        assert!(Label::new(3, 3).is_err());
        assert_eq!(Label::new(1, 3).unwrap().one_hot(3), vec![0.0, 1.0, 0.0]);
    }
}
