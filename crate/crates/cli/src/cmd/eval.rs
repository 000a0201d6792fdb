use std::path::PathBuf;

use irbm::evaluation::{evaluate, permutation_averaged_loglik, EvalReport, PartitionMethod};
use irbm::rng::{kind_rng, StreamKind};
use irbm::Permutation;
use serde::Serialize;

use super::train::eval_options;
use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::{load_splits, parse_split};
use crate::error::{io_error, CliError};

pub const EVAL_SCHEMA: &str = "irbm-eval/1";

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub config: Option<PathBuf>,
    pub split: String,
    pub perms: Option<usize>,
    pub permuted_units: Option<usize>,
    pub converted_rbm: bool,
    pub no_loglik: bool,
    pub out: Option<PathBuf>,
    pub overrides: Vec<String>,
}

#[derive(Serialize)]
pub struct EvalOutput {
    pub schema: &'static str,
    pub split: String,
    /// `exact` or `ais`.
    pub loglik_method: &'static str,
    pub permuted_units: usize,
    /// Likelihood under the stored order alone.
    pub single_order_loglik: Option<f64>,
    /// `avg_loglik - single_order_loglik`.
    pub permutation_gain: Option<f64>,
    pub report: EvalReport,
}

pub fn run(args: EvalArgs) -> Result<(), CliError> {
    let state = checkpoint::load(&args.checkpoint)?;
    let mut cfg = RunConfig::default();
    if let Some(p) = &args.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_flags(&args.overrides)?;
    if let Some(n) = args.perms {
        cfg.eval_perms = n;
    }
    cfg.validate()?;
    let splits = load_splits(&cfg)?;
    let split = parse_split(&args.split)?;
    let data = splits
        .get(split)
        .ok_or_else(|| CliError::Validation(format!("no {} split in this dataset", args.split)))?;
    let params = state.params();
    if params.visible() != data.visible() {
        return Err(CliError::Validation(format!(
            "model has {} visible units, data has {}",
            params.visible(),
            data.visible()
        )));
    }
    let m = args
        .permuted_units
        .unwrap_or_else(|| state.next_regroup_len())
        .min(params.units());
    let mut opts = eval_options(&cfg, &splits.train, m);
    opts.converted = args.converted_rbm;
    opts.skip_loglik = args.no_loglik;
    let method = match opts.partition {
        PartitionMethod::Exact { .. } => "exact",
        PartitionMethod::Ais(_) => "ais",
    };
    let mut rng = kind_rng(cfg.train.seed, state.step(), StreamKind::Evaluation, 1);
    let report = evaluate(params, data, &opts, &mut rng)?;
    let single = if args.no_loglik {
        None
    } else {
        Some(permutation_averaged_loglik(
            params,
            data,
            &[Permutation::identity(m)],
            &opts.partition,
            &mut rng,
        )?)
    };
    let out = EvalOutput {
        schema: EVAL_SCHEMA,
        split: args.split.clone(),
        loglik_method: method,
        permuted_units: m,
        single_order_loglik: single,
        permutation_gain: report.avg_loglik.zip(single).map(|(a, s)| a - s),
        report,
    };
    let json = serde_json::to_string_pretty(&out).expect("report serializes");
    match &args.out {
        Some(p) => std::fs::write(p, json).map_err(|e| io_error(p, e))?,
        None => println!("{json}"),
    }
    Ok(())
}
