mod checkpoint;
mod cmd;
mod config;
mod data;
mod error;
mod pgm;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use error::CliError;

/// Train, evaluate and inspect infinite RBMs.
#[derive(Parser)]
#[command(name = "irbm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model, writing metrics.csv, config.txt and checkpoints.
    ///
    /// Any config key can be given as a trailing `--key value` flag.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "runs/irbm")]
        out_dir: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Evaluate a checkpoint and print a JSON report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        /// Orderings averaged over (default 5).
        #[arg(long)]
        perms: Option<usize>,
        /// Leading units reordered; defaults to the checkpoint's regroup length.
        #[arg(long)]
        permuted_units: Option<usize>,
        /// Also score the model as a classic RBM with `N_h` units.
        #[arg(long)]
        converted_rbm: bool,
        #[arg(long)]
        no_loglik: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run Gibbs chains from random visible states; export samples and filters
    /// as PGM images.
    Sample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 16)]
        n_samples: usize,
        #[arg(long, default_value_t = 10_000)]
        n_steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "samples")]
        out_dir: PathBuf,
        #[arg(long)]
        image_width: Option<usize>,
    },
    /// Normalization, tail, gradient and order-invariance checks.
    Check {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        permuted_units: Option<usize>,
        #[arg(long, default_value_t = 10)]
        perms: usize,
        /// Examples drawn from the held-out split (or at random).
        #[arg(long, default_value_t = 10)]
        examples: usize,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Write a dataset (MNIST IDX, synthetic, ...) as a packed bitmap file.
    ConvertDataset {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
}

/// Pulls `--name value` or `--name=value` out of the trailing overrides, so
/// the command's own flags may appear after config keys.
fn take_value(rest: &mut Vec<String>, name: &str) -> Option<String> {
    let flag = format!("--{name}");
    let prefix = format!("{flag}=");
    let mut found = None;
    let mut i = 0;
    while i < rest.len() {
        if rest[i] == flag && i + 1 < rest.len() {
            found = Some(rest.remove(i + 1));
            rest.remove(i);
        } else if let Some(v) = rest[i].strip_prefix(&prefix) {
            found = Some(v.to_string());
            rest.remove(i);
        } else {
            i += 1;
        }
    }
    found
}

fn take_switch(rest: &mut Vec<String>, name: &str) -> bool {
    let flag = format!("--{name}");
    let before = rest.len();
    rest.retain(|a| *a != flag);
    rest.len() != before
}

fn take_parsed<T: std::str::FromStr>(
    rest: &mut Vec<String>,
    name: &str,
) -> Result<Option<T>, CliError> {
    take_value(rest, name)
        .map(|v| {
            v.parse()
                .map_err(|_| CliError::Validation(format!("--{name}: cannot parse {v:?}")))
        })
        .transpose()
}

fn dispatch(command: Command) -> Result<(), CliError> {
    Ok(match command {
        Command::Train {
            config,
            out_dir,
            resume,
            mut overrides,
        } => cmd::train::run(cmd::train::TrainArgs {
            config: config.or(take_value(&mut overrides, "config").map(PathBuf::from)),
            out_dir: take_value(&mut overrides, "out-dir").map_or(out_dir, PathBuf::from),
            resume: resume.or(take_value(&mut overrides, "resume").map(PathBuf::from)),
            overrides,
        })?,
        Command::Eval {
            checkpoint,
            config,
            split,
            perms,
            permuted_units,
            converted_rbm,
            no_loglik,
            out,
            mut overrides,
        } => cmd::eval::run(cmd::eval::EvalArgs {
            checkpoint,
            config: config.or(take_value(&mut overrides, "config").map(PathBuf::from)),
            split: take_value(&mut overrides, "split").unwrap_or(split),
            perms: perms.or(take_parsed(&mut overrides, "perms")?),
            permuted_units: permuted_units.or(take_parsed(&mut overrides, "permuted-units")?),
            converted_rbm: converted_rbm | take_switch(&mut overrides, "converted-rbm"),
            no_loglik: no_loglik | take_switch(&mut overrides, "no-loglik"),
            out: out.or(take_value(&mut overrides, "out").map(PathBuf::from)),
            overrides,
        })?,
        Command::Sample {
            checkpoint,
            n_samples,
            n_steps,
            seed,
            out_dir,
            image_width,
        } => cmd::sample::run(cmd::sample::SampleArgs {
            checkpoint,
            n_samples,
            n_steps,
            seed,
            out_dir,
            image_width,
        })?,
        Command::Check {
            checkpoint,
            config,
            permuted_units,
            perms,
            examples,
            mut overrides,
        } => cmd::check::run(cmd::check::CheckArgs {
            checkpoint,
            config: config.or(take_value(&mut overrides, "config").map(PathBuf::from)),
            permuted_units: permuted_units.or(take_parsed(&mut overrides, "permuted-units")?),
            perms: take_parsed(&mut overrides, "perms")?.unwrap_or(perms),
            examples: take_parsed(&mut overrides, "examples")?.unwrap_or(examples),
            overrides,
        })?,
        Command::ConvertDataset {
            config,
            out,
            mut overrides,
        } => cmd::convert::run(cmd::convert::ConvertArgs {
            config: config.or(take_value(&mut overrides, "config").map(PathBuf::from)),
            out,
            overrides,
        })?,
    })
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("irbm: {e}");
            e.exit_code()
        }
    }
}
