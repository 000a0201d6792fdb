use std::path::PathBuf;

use irbm::data::Dataset;
use irbm::evaluation::{
    check_order_invariance_capped, exact_log_partition, gradient_check, log_prob_visible,
    visible_from_index, InvarianceReport,
};
use irbm::math::{log_sum_exp, softplus};
use irbm::rng::{kind_rng, StreamKind};
use irbm::{Label, ModelParams};
use rand::Rng;
use serde::Serialize;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::data::load_splits;
use crate::error::CliError;

/// Largest `D` for which the checks enumerate every visible vector.
const ENUM_CAP: usize = 10;
const TRUNCATION: usize = 10_000;
const GRAD_TOL: f64 = 1e-4;

pub struct CheckArgs {
    pub checkpoint: PathBuf,
    pub config: Option<PathBuf>,
    pub permuted_units: Option<usize>,
    pub perms: usize,
    pub examples: usize,
    pub overrides: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub skipped: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CheckOutput {
    pub schema: &'static str,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub invariance: InvarianceReport,
}

fn result(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name,
        passed,
        skipped: false,
        detail,
    }
}

fn skipped(name: &'static str, detail: &str) -> CheckResult {
    CheckResult {
        name,
        passed: true,
        skipped: true,
        detail: detail.into(),
    }
}

/// `log sum_{z <= TRUNCATION} e^{-F(v, z)}` summed term by term, with any
/// label summed out.
fn truncated_log_norm(p: &ModelParams, v: &[u8]) -> f64 {
    let input = p.input_activations(v);
    let vb = p.visible_term(v, None);
    let pen = p.penalty();
    let zero_inc = std::f64::consts::LN_2 - pen.zero_unit_penalty();
    let series = |offset: f64, label: Option<usize>| -> Vec<f64> {
        let mut acc = offset;
        (0..TRUNCATION)
            .map(|i| {
                acc += if i < p.units() {
                    let u = label.map_or(0.0, |k| p.label_weights()[i * p.classes() + k]);
                    softplus(input[i] + u) - pen.unit_penalty(p.hidden_bias()[i])
                } else {
                    zero_inc
                };
                acc
            })
            .collect()
    };
    if p.is_discriminative() {
        let per_label: Vec<f64> = (0..p.classes())
            .map(|k| log_sum_exp(&series(vb + p.label_bias()[k], Some(k))))
            .collect();
        log_sum_exp(&per_label)
    } else {
        log_sum_exp(&series(vb, None))
    }
}

fn random_data(p: &ModelParams, n: usize, seed: u64) -> Result<Dataset, CliError> {
    let mut rng = kind_rng(seed, 0, StreamKind::Evaluation, 2);
    let ex: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..p.visible()).map(|_| rng.random_range(0..2u8)).collect())
        .collect();
    let labels = p
        .is_discriminative()
        .then(|| (0..n).map(|_| rng.random_range(0..p.classes())).collect());
    Ok(Dataset::new(ex, labels, p.visible(), p.classes(), irbm::data::Split::Test)?)
}

pub fn run(args: CheckArgs) -> Result<(), CliError> {
    let state = checkpoint::load(&args.checkpoint)?;
    let p = state.params();
    let seed = state.config().seed;
    let data = if args.config.is_some() || !args.overrides.is_empty() {
        let mut cfg = RunConfig::default();
        if let Some(c) = &args.config {
            cfg.apply_file(c)?;
        }
        cfg.apply_flags(&args.overrides)?;
        cfg.validate()?;
        let d = load_splits(&cfg)?.held_out().clone();
        if d.visible() != p.visible() {
            return Err(CliError::Validation(format!(
                "model has {} visible units, data has {}",
                p.visible(),
                d.visible()
            )));
        }
        d.subset(&(0..args.examples.min(d.len())).collect::<Vec<_>>())
    } else {
        random_data(p, args.examples, seed)?
    };
    if data.is_empty() {
        return Err(CliError::Validation("no examples to check".into()));
    }

    let mut checks = Vec::new();
    checks.push(match p.first_non_finite() {
        None => result("finite_parameters", true, "all parameters finite".into()),
        Some(b) => result("finite_parameters", false, format!("non-finite entry in {b}")),
    });

    checks.push(if p.visible() <= ENUM_CAP {
        let log_z = exact_log_partition(p, ENUM_CAP)?;
        let mut terms = Vec::with_capacity(1 << p.visible());
        for k in 0..1usize << p.visible() {
            terms.push(log_prob_visible(p, &visible_from_index(k, p.visible()), log_z)?);
        }
        let total = log_sum_exp(&terms).exp();
        result(
            "normalization",
            (total - 1.0).abs() < 1e-10,
            format!("sum_v p(v) = {total:.15}"),
        )
    } else {
        skipped("normalization", "visible layer too large to enumerate")
    });

    let mut worst = 0.0f64;
    for v in data.examples() {
        let closed = p.z_posterior(v, None)?.log_norm();
        let summed = truncated_log_norm(p, v);
        worst = worst.max((closed - summed).abs() / closed.abs().max(1.0));
    }
    checks.push(result(
        "geometric_tail",
        worst < 1e-9,
        format!("max relative gap to a {TRUNCATION}-term sum: {worst:.3e}"),
    ));

    let refs: Vec<&[u8]> = data.examples().iter().map(|v| v.as_slice()).collect();
    let labels: Option<Vec<Label>> = data.labels().map(|l| l.to_vec());
    let mut rng = kind_rng(seed, state.step(), StreamKind::Evaluation, 3);
    let g = gradient_check(p, &refs, labels.as_deref(), 20, 1e-5, ENUM_CAP, &mut rng)?;
    let grad_ok = g.generative.is_none_or(|e| e < GRAD_TOL)
        && g.discriminative.is_none_or(|e| e < GRAD_TOL);
    checks.push(if g.generative.is_none() && g.discriminative.is_none() {
        skipped("gradients", "no enumerable or labeled objective to check")
    } else {
        result(
            "gradients",
            grad_ok,
            format!(
                "max relative error over {} coordinates: generative {:?}, discriminative {:?}",
                g.coordinates, g.generative, g.discriminative
            ),
        )
    });

    let m = args
        .permuted_units
        .unwrap_or_else(|| state.next_regroup_len())
        .min(p.units());
    let inv = check_order_invariance_capped(p, &data, m, args.perms, ENUM_CAP, &mut rng)?;
    let holds = inv.max_log_mass >= -30.0 || inv.spread.is_none_or(|s| s < 1e-9);
    checks.push(result(
        "order_invariance",
        holds,
        format!(
            "M = {m}: max ln p(z <= M | v) = {}, spread {:?}",
            inv.max_log_mass, inv.spread
        ),
    ));

    let passed = checks.iter().all(|c| c.passed);
    let out = CheckOutput {
        schema: "irbm-check/1",
        passed,
        checks,
        invariance: inv,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&out).expect("check output serializes")
    );
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = out.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Invariant(failed.join(", ")))
    }
}
