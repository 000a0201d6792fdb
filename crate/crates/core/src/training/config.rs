use serde::{Deserialize, Serialize};

use super::gradient::HybridConvention;
use super::TrainError;
use crate::model::{PenaltyConfig, PenaltyMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Generative,
    Discriminative,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrMode {
    /// `lr(t) = global_lr / (1 + t / lr_half_life)`.
    Decay,
    Adagrad,
}

/// Which estimator feeds the discriminative part of the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisGradient {
    /// Closed-form sums over `z` and `y`.
    Exact,
    /// One `(z, y)` chain sample per example.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegroupMode {
    Off,
    /// `M_t = floor(rho * l_t)` throughout.
    FixedFraction,
    /// `floor(rho * l_t)` until growth stalls, then driven by the observed
    /// posterior modes of `z`.
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub objective: Objective,
    pub alpha: f64,
    pub hybrid_convention: HybridConvention,
    pub dis_gradient: DisGradient,
    pub lr_mode: LrMode,
    pub global_lr: f64,
    pub lr_half_life: f64,
    pub cd_steps: usize,
    pub use_pcd: bool,
    /// Persistent chains; `None` uses the minibatch size.
    pub pcd_chains: Option<usize>,
    pub l1_weight: f64,
    pub l2_weight: f64,
    pub w_bound: f64,
    pub u_bound: f64,
    pub minibatch_size: usize,
    pub regroup_mode: RegroupMode,
    pub regroup_rho: f64,
    pub regroup_offset: f64,
    /// Epoch at which the adaptive schedule takes over; `None` switches once
    /// `l_t` grows by less than `growth_stall` over an epoch.
    pub regroup_switch_epoch: Option<u64>,
    pub growth_stall: f64,
    pub momentum_start: f64,
    pub momentum_end: f64,
    /// `None` ramps over ten epochs' worth of updates.
    pub momentum_ramp_updates: Option<u64>,
    pub beta: f64,
    pub penalty_mode: PenaltyMode,
    pub initial_units: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            objective: Objective::Generative,
            alpha: 0.01,
            hybrid_convention: HybridConvention::Scaled,
            dis_gradient: DisGradient::Exact,
            lr_mode: LrMode::Adagrad,
            global_lr: 0.05,
            lr_half_life: 1000.0,
            cd_steps: 10,
            use_pcd: true,
            pcd_chains: None,
            l1_weight: 1e-4,
            l2_weight: 1e-4,
            w_bound: 10.0,
            u_bound: 5.0,
            minibatch_size: 100,
            regroup_mode: RegroupMode::Off,
            regroup_rho: 0.75,
            regroup_offset: 10.0,
            regroup_switch_epoch: None,
            growth_stall: 0.01,
            momentum_start: 0.5,
            momentum_end: 0.9,
            momentum_ramp_updates: None,
            beta: PenaltyConfig::DEFAULT_BETA,
            penalty_mode: PenaltyMode::Constant,
            initial_units: 1,
            init_scale: 0.0,
            seed: 0,
        }
    }
}

fn bad(msg: String) -> TrainError {
    TrainError::Config(msg)
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError> {
    value
        .trim()
        .parse()
        .map_err(|_| bad(format!("cannot parse {key} = {value:?}")))
}

fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, TrainError> {
    match value.trim() {
        "" | "auto" | "none" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn parse_enum<T>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, TrainError>
where
    T: Copy,
{
    options
        .iter()
        .find(|(name, _)| *name == value.trim())
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            bad(format!("{key} = {value:?}, expected one of {}", names.join(", ")))
        })
}

fn show_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "auto".to_string(), T::to_string)
}

const OBJECTIVES: [(&str, Objective); 3] = [
    ("generative", Objective::Generative),
    ("discriminative", Objective::Discriminative),
    ("hybrid", Objective::Hybrid),
];
const CONVENTIONS: [(&str, HybridConvention); 2] = [
    ("scaled", HybridConvention::Scaled),
    ("plain", HybridConvention::Plain),
];
const DIS_GRADIENTS: [(&str, DisGradient); 2] =
    [("exact", DisGradient::Exact), ("sampled", DisGradient::Sampled)];
const LR_MODES: [(&str, LrMode); 2] = [("decay", LrMode::Decay), ("adagrad", LrMode::Adagrad)];
const REGROUP: [(&str, RegroupMode); 3] = [
    ("off", RegroupMode::Off),
    ("fixed_fraction", RegroupMode::FixedFraction),
    ("adaptive", RegroupMode::Adaptive),
];
const PENALTIES: [(&str, PenaltyMode); 2] = [
    ("constant", PenaltyMode::Constant),
    ("dynamic", PenaltyMode::Dynamic),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, x)| *x == v).map(|(n, _)| *n).unwrap_or("?")
}

impl TrainConfig {
    /// Every key accepted by [`TrainConfig::set`].
    pub const KEYS: [&'static str; 29] = [
        "objective",
        "alpha",
        "hybrid_convention",
        "dis_gradient",
        "lr_mode",
        "global_lr",
        "lr_half_life",
        "cd_steps",
        "use_pcd",
        "pcd_chains",
        "l1_weight",
        "l2_weight",
        "w_bound",
        "u_bound",
        "minibatch_size",
        "regroup_mode",
        "regroup_rho",
        "regroup_offset",
        "regroup_switch_epoch",
        "growth_stall",
        "momentum_start",
        "momentum_end",
        "momentum_ramp_updates",
        "beta",
        "penalty_mode",
        "initial_units",
        "init_scale",
        "seed",
        "hybrid_alpha",
    ];

    /// Sets one field from its textual form. `hybrid_alpha` is an alias of
    /// `alpha`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        match key {
            "objective" => self.objective = parse_enum(key, value, &OBJECTIVES)?,
            "alpha" | "hybrid_alpha" => self.alpha = parse(key, value)?,
            "hybrid_convention" => self.hybrid_convention = parse_enum(key, value, &CONVENTIONS)?,
            "dis_gradient" => self.dis_gradient = parse_enum(key, value, &DIS_GRADIENTS)?,
            "lr_mode" => self.lr_mode = parse_enum(key, value, &LR_MODES)?,
            "global_lr" => self.global_lr = parse(key, value)?,
            "lr_half_life" => self.lr_half_life = parse(key, value)?,
            "cd_steps" => self.cd_steps = parse(key, value)?,
            "use_pcd" => self.use_pcd = parse(key, value)?,
            "pcd_chains" => self.pcd_chains = parse_opt(key, value)?,
            "l1_weight" => self.l1_weight = parse(key, value)?,
            "l2_weight" => self.l2_weight = parse(key, value)?,
            "w_bound" => self.w_bound = parse(key, value)?,
            "u_bound" => self.u_bound = parse(key, value)?,
            "minibatch_size" => self.minibatch_size = parse(key, value)?,
            "regroup_mode" => self.regroup_mode = parse_enum(key, value, &REGROUP)?,
            "regroup_rho" => self.regroup_rho = parse(key, value)?,
            "regroup_offset" => self.regroup_offset = parse(key, value)?,
            "regroup_switch_epoch" => self.regroup_switch_epoch = parse_opt(key, value)?,
            "growth_stall" => self.growth_stall = parse(key, value)?,
            "momentum_start" => self.momentum_start = parse(key, value)?,
            "momentum_end" => self.momentum_end = parse(key, value)?,
            "momentum_ramp_updates" => self.momentum_ramp_updates = parse_opt(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "penalty_mode" => self.penalty_mode = parse_enum(key, value, &PENALTIES)?,
            "initial_units" => self.initial_units = parse(key, value)?,
            "init_scale" => self.init_scale = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(bad(format!("unknown training key {key:?}"))),
        }
        Ok(())
    }

    /// Textual `(key, value)` pairs that [`TrainConfig::set`] reads back to
    /// an identical config.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("objective", name_of(&OBJECTIVES, self.objective).into()),
            ("alpha", self.alpha.to_string()),
            ("hybrid_convention", name_of(&CONVENTIONS, self.hybrid_convention).into()),
            ("dis_gradient", name_of(&DIS_GRADIENTS, self.dis_gradient).into()),
            ("lr_mode", name_of(&LR_MODES, self.lr_mode).into()),
            ("global_lr", self.global_lr.to_string()),
            ("lr_half_life", self.lr_half_life.to_string()),
            ("cd_steps", self.cd_steps.to_string()),
            ("use_pcd", self.use_pcd.to_string()),
            ("pcd_chains", show_opt(&self.pcd_chains)),
            ("l1_weight", self.l1_weight.to_string()),
            ("l2_weight", self.l2_weight.to_string()),
            ("w_bound", self.w_bound.to_string()),
            ("u_bound", self.u_bound.to_string()),
            ("minibatch_size", self.minibatch_size.to_string()),
            ("regroup_mode", name_of(&REGROUP, self.regroup_mode).into()),
            ("regroup_rho", self.regroup_rho.to_string()),
            ("regroup_offset", self.regroup_offset.to_string()),
            ("regroup_switch_epoch", show_opt(&self.regroup_switch_epoch)),
            ("growth_stall", self.growth_stall.to_string()),
            ("momentum_start", self.momentum_start.to_string()),
            ("momentum_end", self.momentum_end.to_string()),
            ("momentum_ramp_updates", show_opt(&self.momentum_ramp_updates)),
            ("beta", self.beta.to_string()),
            ("penalty_mode", name_of(&PENALTIES, self.penalty_mode).into()),
            ("initial_units", self.initial_units.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let nonneg = |name: &str, x: f64| {
            if x.is_finite() && x >= 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} must be finite and >= 0, got {x}")))
            }
        };
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} must be finite and > 0, got {x}")))
            }
        };
        nonneg("alpha", self.alpha)?;
        positive("global_lr", self.global_lr)?;
        positive("lr_half_life", self.lr_half_life)?;
        nonneg("l1_weight", self.l1_weight)?;
        nonneg("l2_weight", self.l2_weight)?;
        positive("w_bound", self.w_bound)?;
        positive("u_bound", self.u_bound)?;
        nonneg("regroup_offset", self.regroup_offset)?;
        nonneg("growth_stall", self.growth_stall)?;
        nonneg("init_scale", self.init_scale)?;
        if !(0.0..=0.9).contains(&self.regroup_rho) {
            return Err(bad(format!("regroup_rho must lie in [0, 0.9], got {}", self.regroup_rho)));
        }
        for (name, m) in [("momentum_start", self.momentum_start), ("momentum_end", self.momentum_end)] {
            if !(0.0..1.0).contains(&m) {
                return Err(bad(format!("{name} must lie in [0, 1), got {m}")));
            }
        }
        if self.cd_steps == 0 {
            return Err(bad("cd_steps must be >= 1".into()));
        }
        if self.minibatch_size == 0 {
            return Err(bad("minibatch_size must be >= 1".into()));
        }
        if self.pcd_chains == Some(0) {
            return Err(bad("pcd_chains must be >= 1".into()));
        }
        if self.initial_units == 0 {
            return Err(bad("initial_units must be >= 1".into()));
        }
        self.penalty()?;
        Ok(())
    }

    pub fn penalty(&self) -> Result<PenaltyConfig, TrainError> {
        Ok(PenaltyConfig::new(self.beta, self.penalty_mode)?)
    }

    /// `(w_dis, w_gen)` of the configured objective.
    pub fn objective_weights(&self) -> (f64, f64) {
        match self.objective {
            Objective::Generative => (0.0, 1.0),
            Objective::Discriminative => (1.0, 0.0),
            Objective::Hybrid => super::gradient::hybrid_weights(self.alpha, self.hybrid_convention),
        }
    }

    pub fn uses_labels(&self) -> bool {
        self.objective != Objective::Generative
    }
}
