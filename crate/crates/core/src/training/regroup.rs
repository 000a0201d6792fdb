use serde::{Deserialize, Serialize};

use super::{RegroupMode, TrainConfig};

/// Summary of one epoch that drives the regroup schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    /// Mean over the epoch's examples of the posterior mode of `z`, with the
    /// tail pooled into `l + 1`.
    pub mean_mz: f64,
    pub units_start: usize,
    pub units_end: usize,
    pub updates: u64,
    /// Regroup length in force after the schedule update.
    pub m_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegroupState {
    /// Regroup length set by the adaptive rule at the last epoch boundary.
    pub m_t: usize,
    /// Per-epoch `M_z` values.
    pub history: Vec<f64>,
    pub adaptive_phase: bool,
}

impl Default for RegroupState {
    fn default() -> Self {
        Self::new()
    }
}

fn fraction_of(rho: f64, units: usize) -> usize {
    // The small slack keeps e.g. 0.8 * 10 at 8 despite rounding.
    (rho * units as f64 + 1e-9).floor() as usize
}

impl RegroupState {
    pub fn new() -> Self {
        Self {
            m_t: 0,
            history: Vec::new(),
            adaptive_phase: false,
        }
    }

    /// Number of leading units to permute at the next update of a model
    /// with `units` materialized units. Always `< units`.
    pub fn current_m(&self, config: &TrainConfig, units: usize) -> usize {
        let m = match config.regroup_mode {
            RegroupMode::Off => 0,
            RegroupMode::FixedFraction => fraction_of(config.regroup_rho, units),
            RegroupMode::Adaptive if !self.adaptive_phase => fraction_of(config.regroup_rho, units),
            RegroupMode::Adaptive => self.m_t,
        };
        m.min(units.saturating_sub(1))
    }

    /// Epoch-boundary update. Returns the regroup length for a model with
    /// `stats.units_end` units.
    pub fn regroup_schedule_update(&mut self, config: &TrainConfig, stats: &EpochStats) -> usize {
        self.history.push(stats.mean_mz);
        if config.regroup_mode == RegroupMode::Adaptive && !self.adaptive_phase {
            self.adaptive_phase = match config.regroup_switch_epoch {
                Some(e) => stats.epoch + 1 >= e,
                None => {
                    let growth = stats.units_end.saturating_sub(stats.units_start) as f64
                        / stats.units_start.max(1) as f64;
                    growth < config.growth_stall
                }
            };
        }
        if self.adaptive_phase {
            self.m_t = adaptive_m(&self.history, config.regroup_offset, stats.units_end);
        }
        self.current_m(config, stats.units_end)
    }
}

/// Mean of the last 20% of the `M_z` history minus `offset`, floored at 0
/// and capped below `units`.
pub fn adaptive_m(history: &[f64], offset: f64, units: usize) -> usize {
    if history.is_empty() {
        return 0;
    }
    let start = (0.8 * history.len() as f64).floor() as usize;
    let window = &history[start.min(history.len() - 1)..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let m = (mean - offset).max(0.0).floor() as usize;
    m.min(units.saturating_sub(1))
}
