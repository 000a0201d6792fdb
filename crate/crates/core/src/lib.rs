//! Infinite restricted Boltzmann machines (and their discriminative variant)
//! trained with random permutations of the leading hidden units.
//!
//! Hidden units are ordered; a random cutoff `z` decides how many of them take
//! part in the energy, and every unit past the `l` materialized ones has zero
//! parameters so sums over `z` close analytically.

pub mod data;
pub mod evaluation;
pub mod inference;
pub mod math;
pub mod model;
pub mod rng;
pub mod training;

pub use model::{
    Label, ModelError, ModelParams, OrderingDiagnostic, ParamBlock, PenaltyConfig, PenaltyMode,
    Permutation, VisibleVector, ZPosterior,
};
