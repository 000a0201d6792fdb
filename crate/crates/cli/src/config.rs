//! Run configuration: flat `key = value` text, overridable from the command
//! line. Every key is either a training key or one of [`RUN_KEYS`].

use std::path::{Path, PathBuf};

use irbm::training::TrainConfig;

use crate::error::{io_error, CliError};

/// Keys that control the run rather than the optimizer.
pub const RUN_KEYS: [&str; 20] = [
    "data_format",
    "data_path",
    "train_images",
    "train_labels",
    "test_images",
    "test_labels",
    "binarize_seed",
    "train_subset",
    "test_subset",
    "valid_fraction",
    "synth_side",
    "synth_train",
    "synth_test",
    "epochs",
    "eval_every",
    "checkpoint_every",
    "eval_perms",
    "ais_temps",
    "ais_chains",
    "eval_loglik",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    BarsAndStripes,
    ShiftedPatterns,
    Mnist,
    Bitmap,
    /// Packed bitmap checked against the silhouette benchmark's split sizes.
    Silhouettes,
}

impl DataFormat {
    fn parse(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "bars-and-stripes" => DataFormat::BarsAndStripes,
            "shifted-patterns" => DataFormat::ShiftedPatterns,
            "mnist" => DataFormat::Mnist,
            "ibmp" => DataFormat::Bitmap,
            "silhouettes" => DataFormat::Silhouettes,
            _ => {
                return Err(CliError::Validation(format!(
                    "data_format must be bars-and-stripes, shifted-patterns, mnist, ibmp or silhouettes, got {s:?}"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DataFormat::BarsAndStripes => "bars-and-stripes",
            DataFormat::ShiftedPatterns => "shifted-patterns",
            DataFormat::Mnist => "mnist",
            DataFormat::Bitmap => "ibmp",
            DataFormat::Silhouettes => "silhouettes",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Training keys given explicitly, in order, as `(key, value)`.
    pub explicit_train: Vec<(String, String)>,
    pub data_format: DataFormat,
    pub data_path: Option<PathBuf>,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub binarize_seed: Option<u64>,
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
    pub valid_fraction: f64,
    pub synth_side: usize,
    pub synth_train: usize,
    pub synth_test: usize,
    pub epochs: u64,
    pub eval_every: u64,
    pub checkpoint_every: Option<u64>,
    pub eval_perms: usize,
    pub ais_temps: usize,
    pub ais_chains: usize,
    /// Estimate the log-likelihood at evaluation epochs.
    pub eval_loglik: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            explicit_train: Vec::new(),
            data_format: DataFormat::BarsAndStripes,
            data_path: None,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            binarize_seed: None,
            train_subset: None,
            test_subset: None,
            valid_fraction: 0.0,
            synth_side: 4,
            synth_train: 500,
            synth_test: 200,
            epochs: 50,
            eval_every: 50,
            checkpoint_every: None,
            eval_perms: 5,
            ais_temps: 1000,
            ais_chains: 100,
            eval_loglik: true,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Validation(format!("{key}: cannot parse {value:?}")))
}

fn opt_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let path = || Some(PathBuf::from(value));
        match key {
            "data_format" => self.data_format = DataFormat::parse(value)?,
            "data_path" => self.data_path = path(),
            "train_images" => self.train_images = path(),
            "train_labels" => self.train_labels = path(),
            "test_images" => self.test_images = path(),
            "test_labels" => self.test_labels = path(),
            "binarize_seed" => self.binarize_seed = opt_num(key, value)?,
            "train_subset" => self.train_subset = opt_num(key, value)?,
            "test_subset" => self.test_subset = opt_num(key, value)?,
            "valid_fraction" => self.valid_fraction = num(key, value)?,
            "synth_side" => self.synth_side = num(key, value)?,
            "synth_train" => self.synth_train = num(key, value)?,
            "synth_test" => self.synth_test = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "eval_every" => self.eval_every = num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = opt_num(key, value)?,
            "eval_perms" => self.eval_perms = num(key, value)?,
            "ais_temps" => self.ais_temps = num(key, value)?,
            "ais_chains" => self.ais_chains = num(key, value)?,
            "eval_loglik" => self.eval_loglik = num(key, value)?,
            _ if TrainConfig::KEYS.contains(&key) => {
                self.train
                    .set(key, value)
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                self.explicit_train.push((key.to_string(), value.to_string()));
            }
            _ => {
                return Err(CliError::Validation(format!(
                    "unknown config key {key:?}; run keys are {} and training keys are {}",
                    RUN_KEYS.join(", "),
                    TrainConfig::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies every `key = value` line; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("line {}: expected key = value, got {raw:?}", n + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::Validation(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        self.apply_text(&text)
    }

    /// Applies `--key value` / `--key=value` pairs; dashes in keys read as
    /// underscores.
    pub fn apply_flags(&mut self, args: &[String]) -> Result<(), CliError> {
        let mut it = args.iter();
        while let Some(arg) = it.next() {
            let flag = arg.strip_prefix("--").ok_or_else(|| {
                CliError::Validation(format!("expected --key value, got {arg:?}"))
            })?;
            let (key, value) = match flag.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| {
                        CliError::Validation(format!("--{flag} needs a value"))
                    })?;
                    (flag.to_string(), v.clone())
                }
            };
            self.set(&key.replace('-', "_"), &value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        if self.eval_every == 0 {
            return Err(CliError::Validation("eval_every must be positive".into()));
        }
        if self.checkpoint_every == Some(0) {
            return Err(CliError::Validation("checkpoint_every must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return Err(CliError::Validation("valid_fraction must lie in [0, 1)".into()));
        }
        if self.eval_perms == 0 {
            return Err(CliError::Validation("eval_perms must be positive".into()));
        }
        if self.ais_temps < 2 || self.ais_chains == 0 {
            return Err(CliError::Validation(
                "ais_temps must be at least 2 and ais_chains positive".into(),
            ));
        }
        match self.data_format {
            DataFormat::Mnist if self.train_images.is_none() => Err(CliError::Validation(
                "mnist data needs train_images".into(),
            )),
            DataFormat::Bitmap | DataFormat::Silhouettes if self.data_path.is_none() => {
                Err(CliError::Validation("bitmap data needs data_path".into()))
            }
            DataFormat::BarsAndStripes | DataFormat::ShiftedPatterns
                if self.synth_side < 2 || self.synth_train == 0 =>
            {
                Err(CliError::Validation(
                    "synthetic data needs synth_side >= 2 and synth_train > 0".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    /// Resolved configuration as `key = value` text that reads back to the
    /// same run.
    pub fn to_text(&self) -> String {
        let show = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("data_format", self.data_format.name().into());
        for (k, p) in [
            ("data_path", &self.data_path),
            ("train_images", &self.train_images),
            ("train_labels", &self.train_labels),
            ("test_images", &self.test_images),
            ("test_labels", &self.test_labels),
        ] {
            if let Some(s) = show(p) {
                push(k, s);
            }
        }
        push("binarize_seed", opt(self.binarize_seed.map(|s| s.to_string())));
        push("train_subset", opt(self.train_subset.map(|s| s.to_string())));
        push("test_subset", opt(self.test_subset.map(|s| s.to_string())));
        push("valid_fraction", self.valid_fraction.to_string());
        push("synth_side", self.synth_side.to_string());
        push("synth_train", self.synth_train.to_string());
        push("synth_test", self.synth_test.to_string());
        push("epochs", self.epochs.to_string());
        push("eval_every", self.eval_every.to_string());
        push("checkpoint_every", opt(self.checkpoint_every.map(|s| s.to_string())));
        push("eval_perms", self.eval_perms.to_string());
        push("ais_temps", self.ais_temps.to_string());
        push("ais_chains", self.ais_chains.to_string());
        push("eval_loglik", self.eval_loglik.to_string());
        for (k, v) in self.train.to_pairs() {
            push(k, v);
        }
        out
    }
}
