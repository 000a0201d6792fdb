use rand::Rng;

use super::{
    grad_discriminative_exact, grad_discriminative_sampled, grad_generative, DisGradient,
    EpochStats, Gradient, OptimizerState, RegroupState, StepRule, TrainConfig, TrainError,
};
use crate::data::Dataset;
use crate::inference::{
    gibbs_sweeps, label_chain_step, run_pcd, ChainStart, LabelChainState, NegativeSample,
    PersistentChains,
};
use crate::model::{Label, ModelParams, Permutation, ZPosterior};
use crate::rng::{kind_rng, StreamKind};

/// Uniform permutation of the first `m` units; identity for `m <= 1`.
pub fn sample_permutation<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Permutation {
    if m <= 1 {
        return Permutation::identity(m);
    }
    Permutation::sample(m, rng)
}

/// A unit is added when both phases reached past the last materialized
/// unit.
pub fn growth_decision(units: usize, z_pos_max: usize, z_neg_max: usize) -> bool {
    z_pos_max > units && z_neg_max > units
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub step: u64,
    pub units_before: usize,
    pub units_after: usize,
    pub regroup_len: usize,
    pub z_pos_max: usize,
    pub z_neg_max: usize,
    /// Sum over the minibatch of the pooled posterior mode of `z`.
    pub mz_sum: f64,
}

/// Everything that evolves during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    params: ModelParams,
    opt: OptimizerState,
    regroup: RegroupState,
    chains: Option<PersistentChains>,
    config: TrainConfig,
    epoch: u64,
}

impl TrainState {
    /// Fresh model for data of dimension `visible` with `classes` labels
    /// (ignored by the generative objective). `examples_per_epoch` sizes the
    /// default momentum ramp.
    pub fn new(
        config: TrainConfig,
        visible: usize,
        classes: usize,
        examples_per_epoch: usize,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let classes = if config.uses_labels() {
            if classes == 0 {
                return Err(TrainError::MissingLabels);
            }
            classes
        } else {
            0
        };
        let penalty = config.penalty()?;
        let params = if config.init_scale > 0.0 {
            let mut rng = kind_rng(config.seed, 0, StreamKind::Init, u64::from(u32::MAX));
            ModelParams::random_uniform(
                visible,
                classes,
                config.initial_units,
                config.init_scale,
                penalty,
                &mut rng,
            )?
        } else {
            ModelParams::zeros(visible, classes, config.initial_units, penalty)?
        };
        let per_epoch = examples_per_epoch.div_ceil(config.minibatch_size).max(1) as u64;
        let ramp = config.momentum_ramp_updates.unwrap_or(10 * per_epoch);
        let opt = OptimizerState::new(&params, ramp);
        let (_, w_gen) = config.objective_weights();
        let chains = (config.use_pcd && w_gen > 0.0).then(|| {
            PersistentChains::random(
                config.pcd_chains.unwrap_or(config.minibatch_size),
                visible,
                classes,
                config.seed,
            )
        });
        Ok(Self {
            params,
            opt,
            regroup: RegroupState::new(),
            chains,
            config,
            epoch: 0,
        })
    }

    /// Reassembles a state, e.g. from a checkpoint.
    pub fn from_parts(
        config: TrainConfig,
        params: ModelParams,
        opt: OptimizerState,
        regroup: RegroupState,
        chains: Option<PersistentChains>,
        epoch: u64,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        let shape_ok = opt.accum.units() == params.units()
            && opt.velocity.units() == params.units()
            && opt.ages.len() == params.units()
            && opt.accum.visible() == params.visible()
            && opt.accum.classes() == params.classes();
        if !shape_ok {
            return Err(TrainError::Config(
                "optimizer state does not match the model shape".into(),
            ));
        }
        Ok(Self {
            params,
            opt,
            regroup,
            chains,
            config,
            epoch,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.opt
    }

    pub fn regroup(&self) -> &RegroupState {
        &self.regroup
    }

    pub fn chains(&self) -> Option<&PersistentChains> {
        self.chains.as_ref()
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn step(&self) -> u64 {
        self.opt.step
    }

    /// Regroup length the next update will use.
    pub fn next_regroup_len(&self) -> usize {
        self.regroup.current_m(&self.config, self.params.units())
    }

    /// One parameter update on a minibatch: permute, positive phase,
    /// negative phase, descent step, max-norm projection, growth.
    ///
    /// On error the model, optimizer and chains are left as they were.
    pub fn update_step(
        &mut self,
        examples: &[&[u8]],
        labels: Option<&[Label]>,
    ) -> Result<StepStats, TrainError> {
        if examples.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let labels = if self.params.is_discriminative() {
            let ls = labels.ok_or(TrainError::MissingLabels)?;
            if ls.len() != examples.len() {
                return Err(TrainError::BatchMismatch {
                    expected: examples.len(),
                    got: ls.len(),
                });
            }
            Some(ls)
        } else {
            None
        };
        for (i, v) in examples.iter().enumerate() {
            self.params.check_visible(v)?;
            self.params.check_label(labels.map(|ls| ls[i]))?;
        }

        let t = self.opt.step;
        let units = self.params.units();
        let m = self.regroup.current_m(&self.config, units);
        let perm = sample_permutation(
            m,
            &mut kind_rng(self.config.seed, t, StreamKind::Permutation, 0),
        );
        let permuted = !perm.is_identity();
        if permuted {
            self.params.permute_units(&perm)?;
            self.opt.permute_units(&perm);
        }
        let saved_chains = self.chains.clone();
        match self.descend(examples, labels, t) {
            Ok((z_pos_max, z_neg_max, mz_sum)) => {
                self.opt.tick();
                if growth_decision(units, z_pos_max, z_neg_max) {
                    self.params.push_zero_unit();
                    self.opt.push_unit();
                }
                Ok(StepStats {
                    step: t,
                    units_before: units,
                    units_after: self.params.units(),
                    regroup_len: m,
                    z_pos_max,
                    z_neg_max,
                    mz_sum,
                })
            }
            Err(e) => {
                if permuted {
                    let inv = perm.inverse();
                    self.params.permute_units(&inv)?;
                    self.opt.permute_units(&inv);
                }
                self.chains = saved_chains;
                Err(e)
            }
        }
    }

    /// Phases and descent step; returns `(max z_pos, max z_neg, sum M_z)`.
    fn descend(
        &mut self,
        examples: &[&[u8]],
        labels: Option<&[Label]>,
        t: u64,
    ) -> Result<(usize, usize, f64), TrainError> {
        let cfg = &self.config;
        let params = &self.params;
        let (w_dis, w_gen) = cfg.objective_weights();
        let k = cfg.cd_steps;
        let mut positives = Vec::with_capacity(examples.len());
        let mut gen_negs: Vec<NegativeSample> = Vec::new();
        let mut label_negs: Vec<LabelChainState> = Vec::new();
        let mut mz_sum = 0.0;
        for (i, &v) in examples.iter().enumerate() {
            let y = labels.map(|ls| ls[i]);
            let mut rng = kind_rng(cfg.seed, t, StreamKind::Example, i as u64);
            let input = params.input_activations(v);
            let marginal = params.z_posterior_from_input(v, &input, None);
            mz_sum += marginal.argmax_pooled() as f64;
            let z_pos = match y {
                Some(y) => {
                    let posts: Vec<ZPosterior> = (0..params.classes())
                        .map(|c| params.z_posterior_from_input(v, &input, Some(Label::from_index(c))))
                        .collect();
                    let z_pos = posts[y.index()].sample(&mut rng);
                    if w_dis > 0.0 {
                        let mut st = LabelChainState { y, z: z_pos };
                        for _ in 0..k {
                            st = label_chain_step(&posts, st, &mut rng);
                        }
                        label_negs.push(st);
                    }
                    z_pos
                }
                None => marginal.sample(&mut rng),
            };
            if w_gen > 0.0 && !cfg.use_pcd {
                gen_negs.push(gibbs_sweeps(params, v, y, z_pos, k, &mut rng));
            }
            positives.push(ChainStart { v, y, z: z_pos });
        }
        if w_gen > 0.0 && cfg.use_pcd {
            let chains = self.chains.as_mut().ok_or_else(|| {
                TrainError::Config("persistent chains missing from training state".into())
            })?;
            gen_negs = run_pcd(params, chains, k, cfg.seed, t)?;
        }

        let mut grad = Gradient::zeros_like(params);
        if w_gen > 0.0 {
            grad.add_scaled(&grad_generative(params, &positives, &gen_negs)?, w_gen);
        }
        if w_dis > 0.0 {
            let labels = labels.ok_or(TrainError::MissingLabels)?;
            let dis = match cfg.dis_gradient {
                DisGradient::Exact => grad_discriminative_exact(params, examples, labels)?,
                DisGradient::Sampled => grad_discriminative_sampled(params, &positives, &label_negs)?,
            };
            grad.add_scaled(&dis, w_dis);
        }

        let z_pos_max = positives.iter().map(|s| s.z).max().unwrap_or(0);
        let z_neg_max = gen_negs
            .iter()
            .map(|s| s.z)
            .chain(label_negs.iter().map(|s| s.z))
            .max()
            .unwrap_or(0);

        let rule = StepRule::from_config(cfg);
        let (w_bound, u_bound) = (cfg.w_bound, cfg.u_bound);
        self.opt.apply(&mut self.params, &grad, &rule)?;
        self.params.project_max_norm(w_bound, u_bound);
        Ok((z_pos_max, z_neg_max, mz_sum))
    }

    /// One pass over `data` in a freshly shuffled order, followed by the
    /// regroup schedule update.
    pub fn train_epoch(&mut self, data: &Dataset) -> Result<EpochStats, TrainError> {
        if data.is_empty() {
            return Err(TrainError::EmptyBatch);
        }
        let labels = if self.params.is_discriminative() {
            Some(data.labels().ok_or(TrainError::MissingLabels)?)
        } else {
            None
        };
        let order = data.epoch_order(self.config.seed, self.epoch);
        let units_start = self.params.units();
        let mut mz_sum = 0.0;
        let mut updates = 0;
        for chunk in order.chunks(self.config.minibatch_size) {
            let xs: Vec<&[u8]> = chunk.iter().map(|&i| data.example(i)).collect();
            let ys: Option<Vec<Label>> = labels.map(|ls| chunk.iter().map(|&i| ls[i]).collect());
            let s = self.update_step(&xs, ys.as_deref())?;
            mz_sum += s.mz_sum;
            updates += 1;
        }
        let mut stats = EpochStats {
            epoch: self.epoch,
            mean_mz: mz_sum / data.len() as f64,
            units_start,
            units_end: self.params.units(),
            updates,
            m_t: 0,
        };
        stats.m_t = self.regroup.regroup_schedule_update(&self.config, &stats);
        self.epoch += 1;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_bars_and_stripes;
    use crate::training::{Objective, RegroupMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn permutation_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(sample_permutation(1, &mut rng).is_identity());
        assert!(sample_permutation(0, &mut rng).is_empty());
        let n = 60_000;
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..n {
            *counts.entry(sample_permutation(3, &mut rng).order().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for &c in counts.values() {
            assert!((c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn growth_needs_both_phases() {
        assert!(growth_decision(2, 3, 3));
        assert!(!growth_decision(2, 3, 2));
        assert!(!growth_decision(2, 2, 3));
    }

    fn small_config(objective: Objective) -> TrainConfig {
        TrainConfig {
            objective,
            minibatch_size: 10,
            cd_steps: 2,
            global_lr: 0.05,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn update_invariants_hold_for_every_objective() {
        let data = synth_bars_and_stripes(3, 40, 1).unwrap();
        for objective in [Objective::Generative, Objective::Discriminative, Objective::Hybrid] {
            for use_pcd in [false, true] {
                let cfg = TrainConfig {
                    use_pcd,
                    regroup_mode: RegroupMode::FixedFraction,
                    w_bound: 0.5,
                    u_bound: 0.3,
                    ..small_config(objective)
                };
                let mut st = TrainState::new(cfg, 9, 2, data.len()).unwrap();
                let mut last = st.params().units();
                for _ in 0..3 {
                    st.train_epoch(&data).unwrap();
                    let p = st.params();
                    assert!(p.units() >= last);
                    last = p.units();
                    for i in 0..p.units() {
                        let wn: f64 = p.unit_weights(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                        let un: f64 =
                            p.unit_label_weights(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                        assert!(wn <= 0.5 && un <= 0.3);
                    }
                    assert_eq!(st.optimizer().ages.len(), p.units());
                    assert!(p.first_non_finite().is_none());
                }
                assert!(st.params().units() > 1, "{objective:?} pcd={use_pcd}");
            }
        }
    }

    #[test]
    fn units_grow_by_at_most_one_per_step() {
        let data = synth_bars_and_stripes(3, 30, 2).unwrap();
        let mut st = TrainState::new(small_config(Objective::Generative), 9, 0, 30).unwrap();
        let xs: Vec<&[u8]> = data.examples().iter().map(|x| x.as_slice()).collect();
        for _ in 0..20 {
            let s = st.update_step(&xs[..10], None).unwrap();
            assert!(s.units_after == s.units_before || s.units_after == s.units_before + 1);
            assert_eq!(
                s.units_after > s.units_before,
                growth_decision(s.units_before, s.z_pos_max, s.z_neg_max)
            );
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synth_bars_and_stripes(3, 30, 3).unwrap();
        let cfg = TrainConfig {
            regroup_mode: RegroupMode::FixedFraction,
            ..small_config(Objective::Hybrid)
        };
        let run = || {
            let mut st = TrainState::new(cfg.clone(), 9, 2, 30).unwrap();
            for _ in 0..2 {
                st.train_epoch(&data).unwrap();
            }
            st
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts_and_restores() {
        let data = synth_bars_and_stripes(2, 10, 3).unwrap();
        let cfg = TrainConfig {
            regroup_mode: RegroupMode::FixedFraction,
            regroup_rho: 0.9,
            ..small_config(Objective::Generative)
        };
        let mut st = TrainState::new(cfg, 4, 0, 10).unwrap();
        for _ in 0..5 {
            st.train_epoch(&data).unwrap();
        }
        st.params.weights_mut()[0] = f64::NAN;
        let before = st.clone();
        let xs: Vec<&[u8]> = data.examples().iter().map(|x| x.as_slice()).collect();
        let err = st.update_step(&xs, None).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite { .. } | TrainError::Model(_)), "{err}");
        // NaN != NaN, so compare the rendered state.
        assert_eq!(format!("{st:?}"), format!("{before:?}"));
    }

    #[test]
    fn missing_labels_rejected() {
        let cfg = small_config(Objective::Discriminative);
        assert!(matches!(TrainState::new(cfg.clone(), 4, 0, 10), Err(TrainError::MissingLabels)));
        let mut st = TrainState::new(cfg, 2, 2, 10).unwrap();
        assert!(matches!(st.update_step(&[&[0, 1]], None), Err(TrainError::MissingLabels)));
    }
}
