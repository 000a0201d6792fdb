use serde::{Deserialize, Serialize};

use super::{Gradient, LrMode, ParamBuffer, TrainConfig, TrainError};
use crate::model::{ModelParams, ParamBlock, Permutation};

const ADAGRAD_EPS: f64 = 1e-8;

/// ADAGRAD accumulators, momentum buffers and per-unit ages. Unit-indexed
/// rows move with the units whenever they are permuted.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub accum: ParamBuffer,
    pub velocity: ParamBuffer,
    /// Updates since each unit was added.
    pub ages: Vec<u64>,
    /// Updates performed so far.
    pub step: u64,
    /// Updates over which momentum ramps from start to end.
    pub momentum_ramp: u64,
}

/// Scalar settings of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRule {
    pub lr_mode: LrMode,
    pub global_lr: f64,
    pub lr_half_life: f64,
    pub l1: f64,
    pub l2: f64,
    pub momentum_start: f64,
    pub momentum_end: f64,
}

impl StepRule {
    pub fn from_config(c: &TrainConfig) -> Self {
        Self {
            lr_mode: c.lr_mode,
            global_lr: c.global_lr,
            lr_half_life: c.lr_half_life,
            l1: c.l1_weight,
            l2: c.l2_weight,
            momentum_start: c.momentum_start,
            momentum_end: c.momentum_end,
        }
    }
}

impl OptimizerState {
    pub fn new(params: &ModelParams, momentum_ramp: u64) -> Self {
        Self {
            accum: ParamBuffer::zeros_like(params),
            velocity: ParamBuffer::zeros_like(params),
            ages: vec![0; params.units()],
            step: 0,
            momentum_ramp,
        }
    }

    /// Momentum for something `age` updates old: linear from start to end
    /// over the ramp, constant afterwards.
    pub fn momentum(&self, rule: &StepRule, age: u64) -> f64 {
        if self.momentum_ramp == 0 || age >= self.momentum_ramp {
            return rule.momentum_end;
        }
        let frac = age as f64 / self.momentum_ramp as f64;
        rule.momentum_start + (rule.momentum_end - rule.momentum_start) * frac
    }

    /// Learning rate of the decaying schedule at the current step.
    pub fn decayed_lr(&self, rule: &StepRule) -> f64 {
        rule.global_lr / (1.0 + self.step as f64 / rule.lr_half_life)
    }

    pub fn permute_units(&mut self, perm: &Permutation) {
        self.accum.permute_units(perm);
        self.velocity.permute_units(perm);
        perm.apply_rows(&mut self.ages, 1);
    }

    /// Fresh state for a newly added unit.
    pub fn push_unit(&mut self) {
        self.accum.push_unit();
        self.velocity.push_unit();
        self.ages.push(0);
    }

    /// Adds the L2 and L1 terms on `W` and `U` to a loss gradient.
    pub fn regularized(grad: &Gradient, params: &ModelParams, rule: &StepRule) -> Gradient {
        let mut g = grad.clone();
        for b in [ParamBlock::Weights, ParamBlock::LabelWeights] {
            for (x, &th) in g.block_mut(b).iter_mut().zip(params.block(b)) {
                let sign = if th > 0.0 {
                    1.0
                } else if th < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *x += rule.l2 * th + rule.l1 * sign;
            }
        }
        g
    }

    /// Applies one descent step of the regularized gradient. Nothing is
    /// modified if any entry is non-finite.
    pub fn apply(
        &mut self,
        params: &mut ModelParams,
        grad: &Gradient,
        rule: &StepRule,
    ) -> Result<(), TrainError> {
        let g = Self::regularized(grad, params, rule);
        if let Some(block) = g.first_non_finite() {
            return Err(TrainError::NonFinite { block });
        }
        let lr = match rule.lr_mode {
            LrMode::Decay => self.decayed_lr(rule),
            LrMode::Adagrad => rule.global_lr,
        };
        let global_mu = self.momentum(rule, self.step);
        let unit_mu: Vec<f64> = self.ages.iter().map(|&a| self.momentum(rule, a)).collect();
        for b in ParamBlock::ALL {
            let width = g.unit_width(b);
            let gb = g.block(b);
            let acc = self.accum.block_mut(b);
            let vel = self.velocity.block_mut(b);
            let th = params.block_mut(b);
            for k in 0..gb.len() {
                let step = match rule.lr_mode {
                    LrMode::Decay => lr * gb[k],
                    LrMode::Adagrad => {
                        acc[k] += gb[k] * gb[k];
                        lr * gb[k] / (acc[k].sqrt() + ADAGRAD_EPS)
                    }
                };
                let mu = match width {
                    Some(w) => unit_mu[k / w.max(1)],
                    None => global_mu,
                };
                vel[k] = mu * vel[k] - step;
                th[k] += vel[k];
            }
        }
        Ok(())
    }

    /// Marks the end of an update.
    pub fn tick(&mut self) {
        self.ages.iter_mut().for_each(|a| *a += 1);
        self.step += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PenaltyConfig;

    fn rule(mode: LrMode) -> StepRule {
        StepRule {
            lr_mode: mode,
            global_lr: 0.1,
            lr_half_life: 10.0,
            l1: 0.0,
            l2: 0.0,
            momentum_start: 0.5,
            momentum_end: 0.9,
        }
    }

    #[test]
    fn zero_gradient_without_regularization_is_a_no_op() {
        let mut p = ModelParams::zeros(3, 2, 2, PenaltyConfig::default()).unwrap();
        p.weights_mut()[1] = 0.3;
        let before = p.clone();
        let mut opt = OptimizerState::new(&p, 10);
        for mode in [LrMode::Decay, LrMode::Adagrad] {
            let g = Gradient::zeros_like(&p);
            opt.apply(&mut p, &g, &rule(mode)).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn momentum_ramps_linearly_then_saturates() {
        let p = ModelParams::zeros(1, 0, 1, PenaltyConfig::default()).unwrap();
        let opt = OptimizerState::new(&p, 4);
        let r = rule(LrMode::Decay);
        assert_eq!(opt.momentum(&r, 0), 0.5);
        assert!((opt.momentum(&r, 2) - 0.7).abs() < 1e-15);
        assert_eq!(opt.momentum(&r, 4), 0.9);
        assert_eq!(opt.momentum(&r, 400), 0.9);
    }

    #[test]
    fn adagrad_first_step_has_magnitude_lr() {
        let mut p = ModelParams::zeros(2, 0, 1, PenaltyConfig::default()).unwrap();
        let mut opt = OptimizerState::new(&p, 10);
        let mut g = Gradient::zeros_like(&p);
        g.block_mut(ParamBlock::VisibleBias)[0] = 3.0;
        opt.apply(&mut p, &g, &rule(LrMode::Adagrad)).unwrap();
        assert!((p.visible_bias()[0] + 0.1).abs() < 1e-9);
        assert_eq!(opt.accum.block(ParamBlock::VisibleBias)[0], 9.0);
    }

    #[test]
    fn decay_schedule_and_velocity() {
        let mut p = ModelParams::zeros(1, 0, 1, PenaltyConfig::default()).unwrap();
        let mut opt = OptimizerState::new(&p, 0);
        opt.step = 10;
        let r = rule(LrMode::Decay);
        assert!((opt.decayed_lr(&r) - 0.05).abs() < 1e-15);
        let mut g = Gradient::zeros_like(&p);
        g.block_mut(ParamBlock::HiddenBias)[0] = 1.0;
        opt.apply(&mut p, &g, &r).unwrap();
        opt.apply(&mut p, &g, &r).unwrap();
        // v1 = -0.05, v2 = 0.9 * v1 - 0.05.
        assert!((p.hidden_bias()[0] - (-0.05 - 0.095)).abs() < 1e-15);
    }

    #[test]
    fn l1_l2_touch_only_weights() {
        let mut p = ModelParams::zeros(2, 2, 1, PenaltyConfig::default()).unwrap();
        p.weights_mut()[0] = 2.0;
        p.label_weights_mut()[1] = -1.0;
        p.visible_bias_mut()[0] = 5.0;
        let mut r = rule(LrMode::Decay);
        r.l1 = 0.1;
        r.l2 = 0.01;
        let g = OptimizerState::regularized(&Gradient::zeros_like(&p), &p, &r);
        assert!((g.block(ParamBlock::Weights)[0] - 0.12).abs() < 1e-15);
        assert_eq!(g.block(ParamBlock::Weights)[1], 0.0);
        assert!((g.block(ParamBlock::LabelWeights)[1] + 0.11).abs() < 1e-15);
        assert_eq!(g.block(ParamBlock::VisibleBias)[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_leaves_state_untouched() {
        let mut p = ModelParams::zeros(2, 0, 1, PenaltyConfig::default()).unwrap();
        let mut opt = OptimizerState::new(&p, 3);
        let mut g = Gradient::zeros_like(&p);
        g.block_mut(ParamBlock::Weights)[1] = f64::NAN;
        g.block_mut(ParamBlock::VisibleBias)[0] = 1.0;
        let (p0, o0) = (p.clone(), opt.clone());
        assert!(matches!(
            opt.apply(&mut p, &g, &rule(LrMode::Adagrad)),
            Err(TrainError::NonFinite { block: ParamBlock::Weights })
        ));
        assert_eq!(p, p0);
        assert_eq!(opt, o0);
    }

    #[test]
    fn permuting_twice_restores_state() {
        let p = ModelParams::zeros(2, 1, 3, PenaltyConfig::default()).unwrap();
        let mut opt = OptimizerState::new(&p, 3);
        opt.ages = vec![5, 7, 9];
        opt.accum.block_mut(ParamBlock::Weights)[0] = 1.0;
        opt.velocity.block_mut(ParamBlock::HiddenBias)[2] = -2.0;
        let before = opt.clone();
        let perm = Permutation::from_order(vec![2, 0, 1]).unwrap();
        opt.permute_units(&perm);
        assert_eq!(opt.ages, vec![9, 5, 7]);
        opt.permute_units(&perm.inverse());
        assert_eq!(opt, before);
    }
}
