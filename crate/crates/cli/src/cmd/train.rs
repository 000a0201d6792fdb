use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use irbm::data::Dataset;
use irbm::evaluation::{
    base_rate_bias, check_order_invariance_capped, evaluate, AisOptions, EvalOptions, EvalReport,
    PartitionMethod,
};
use irbm::rng::{kind_rng, StreamKind};
use irbm::training::{TrainError, TrainState};
use serde::Serialize;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::load_splits;
use crate::error::{io_error, CliError};

pub const METRICS_VERSION: &str = "# irbm-metrics v1";
pub const METRICS_HEADER: &str = "epoch,avg_loglik,error,N_h,l_t,M_t,max_log_mass";

pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub resume: Option<PathBuf>,
    pub overrides: Vec<String>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn eval_options(cfg: &RunConfig, train: &Dataset, permuted: usize) -> EvalOptions {
    let mut ais = AisOptions::new(cfg.ais_temps, cfg.ais_chains);
    ais.base_visible_bias = Some(base_rate_bias(train));
    EvalOptions {
        n_orders: cfg.eval_perms,
        permuted_units: Some(permuted),
        partition: PartitionMethod::auto(train.visible(), ais),
        minibatch_size: cfg.train.minibatch_size,
        converted: false,
        skip_loglik: !cfg.eval_loglik,
    }
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    error: String,
    epoch: u64,
    step: u64,
    units: usize,
    max_abs_param: f64,
    checkpoint: &'a str,
}

fn dump_failure(out: &Path, state: &TrainState, err: &TrainError) -> Result<(), CliError> {
    let ckpt = out.join("checkpoint-failed.irbm");
    checkpoint::save(state, &ckpt)?;
    let diag = Diagnostic {
        error: err.to_string(),
        epoch: state.epoch(),
        step: state.step(),
        units: state.params().units(),
        max_abs_param: state
            .params()
            .to_flat()
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs())),
        checkpoint: "checkpoint-failed.irbm",
    };
    let path = out.join("diagnostic.json");
    let json = serde_json::to_string_pretty(&diag).expect("diagnostic serializes");
    std::fs::write(&path, json).map_err(|e| io_error(&path, e))
}

/// Restores a checkpoint, refusing training keys that contradict it.
fn resume_state(path: &Path, cfg: &RunConfig) -> Result<TrainState, CliError> {
    let state = checkpoint::load(path)?;
    let mut wanted = state.config().clone();
    for (k, v) in &cfg.explicit_train {
        wanted
            .set(k, v)
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    if &wanted != state.config() {
        return Err(CliError::Validation(
            "training keys differ from the checkpoint being resumed".into(),
        ));
    }
    Ok(state)
}

pub fn run(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &args.config {
        cfg.apply_file(p)?;
    }
    cfg.apply_flags(&args.overrides)?;
    cfg.validate()?;
    let splits = load_splits(&cfg)?;
    let train = &splits.train;

    let mut state = match &args.resume {
        Some(p) => resume_state(p, &cfg)?,
        None => TrainState::new(cfg.train.clone(), train.visible(), train.classes(), train.len())?,
    };
    cfg.train = state.config().clone();
    if state.params().visible() != train.visible() {
        return Err(CliError::Validation(format!(
            "model has {} visible units, data has {}",
            state.params().visible(),
            train.visible()
        )));
    }

    let out = &args.out_dir;
    std::fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let cfg_path = out.join("config.txt");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(|e| io_error(&cfg_path, e))?;

    let metrics_path = out.join("metrics.csv");
    let append = args.resume.is_some() && metrics_path.exists();
    let mut metrics = OpenOptions::new()
        .create(true)
        .append(append)
        .write(true)
        .truncate(!append)
        .open(&metrics_path)
        .map_err(|e| io_error(&metrics_path, e))?;
    if !append {
        writeln!(metrics, "{METRICS_VERSION}\n{METRICS_HEADER}")
            .map_err(|e| io_error(&metrics_path, e))?;
    }

    let held_out = splits.held_out();
    let ckpt_every = cfg.checkpoint_every.unwrap_or(cfg.eval_every);
    let mut last_report: Option<EvalReport> = None;
    while state.epoch() < cfg.epochs {
        if let Err(e) = state.train_epoch(train) {
            dump_failure(out, &state, &e)?;
            return Err(CliError::Runtime(format!(
                "{e}; state before the failing update saved to checkpoint-failed.irbm"
            )));
        }
        let ep = state.epoch();
        let last = ep == cfg.epochs;
        let m_t = state.next_regroup_len();
        let (mut ll, mut err, mut n_h, mut mass) = (None, None, None, None);
        if ep % cfg.eval_every == 0 || last {
            let mut rng = kind_rng(cfg.train.seed, ep, StreamKind::Evaluation, 0);
            let report = evaluate(state.params(), held_out, &eval_options(&cfg, train, m_t), &mut rng)?;
            let inv = check_order_invariance_capped(
                state.params(),
                held_out,
                m_t,
                cfg.eval_perms,
                0,
                &mut rng,
            )?;
            ll = report.avg_loglik;
            err = report.classification_error;
            n_h = Some(report.n_h);
            mass = Some(inv.max_log_mass);
            last_report = Some(report);
        }
        writeln!(
            metrics,
            "{ep},{},{},{},{},{m_t},{}",
            fmt_opt(ll),
            fmt_opt(err),
            n_h.map(|n| n.to_string()).unwrap_or_default(),
            state.params().units(),
            fmt_opt(mass)
        )
        .map_err(|e| io_error(&metrics_path, e))?;
        eprintln!(
            "epoch {ep}: l_t={} M_t={m_t}{}{}",
            state.params().units(),
            ll.map(|v| format!(" loglik={v:.4}")).unwrap_or_default(),
            err.map(|v| format!(" error={v:.4}")).unwrap_or_default(),
        );
        if ep % ckpt_every == 0 && !last {
            checkpoint::save(&state, &out.join("checkpoint.irbm"))?;
        }
    }
    checkpoint::save(&state, &out.join("checkpoint.irbm"))?;
    if let Some(r) = last_report {
        let path = out.join("report.json");
        let json = serde_json::to_string_pretty(&r).expect("report serializes");
        std::fs::write(&path, json).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}
