use irbm::data::{
    binarize_stochastic, load_mnist_idx, load_silhouettes, read_bitmap, synth_bars_and_stripes,
    synth_shifted_patterns, Dataset, Split,
};

use crate::config::{DataFormat, RunConfig};
use crate::error::{io_error, CliError};

/// Templates and flip rate of the shifted-pattern family.
const SHIFTED_TEMPLATES: usize = 4;
const SHIFTED_FLIP: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub valid: Option<Dataset>,
    pub test: Option<Dataset>,
}

impl Splits {
    pub fn get(&self, split: Split) -> Option<&Dataset> {
        match split {
            Split::Train => Some(&self.train),
            Split::Valid => self.valid.as_ref(),
            Split::Test => self.test.as_ref(),
        }
    }

    /// Held-out data for periodic evaluation: test, else valid, else train.
    pub fn held_out(&self) -> &Dataset {
        self.test.as_ref().or(self.valid.as_ref()).unwrap_or(&self.train)
    }
}

fn with_classes(d: Dataset, classes: usize) -> Result<Dataset, CliError> {
    if d.classes() == classes {
        return Ok(d);
    }
    let labels = d.labels().map(|ls| ls.iter().map(|y| y.index()).collect());
    Ok(Dataset::new(d.examples().to_vec(), labels, d.visible(), classes, d.split())?)
}

fn truncate(d: Dataset, n: Option<usize>) -> Dataset {
    match n {
        Some(n) if n < d.len() => d.subset(&(0..n).collect::<Vec<_>>()),
        _ => d,
    }
}

fn non_empty(d: Dataset) -> Option<Dataset> {
    (!d.is_empty()).then_some(d)
}

pub fn load_splits(cfg: &RunConfig) -> Result<Splits, CliError> {
    let seed = cfg.train.seed;
    let (train, mut valid, test) = match cfg.data_format {
        DataFormat::BarsAndStripes => {
            let train = synth_bars_and_stripes(cfg.synth_side, cfg.synth_train, seed)?;
            let test = synth_bars_and_stripes(cfg.synth_side, cfg.synth_test, seed.wrapping_add(1))?
                .with_split(Split::Test);
            (train, None, non_empty(test))
        }
        DataFormat::ShiftedPatterns => {
            let make = |n, s| {
                synth_shifted_patterns(cfg.synth_side, SHIFTED_TEMPLATES, n, SHIFTED_FLIP, s)
            };
            let train = make(cfg.synth_train, seed)?;
            let test = make(cfg.synth_test, seed.wrapping_add(1))?.with_split(Split::Test);
            (train, None, non_empty(test))
        }
        DataFormat::Mnist => {
            let bseed = cfg.binarize_seed.unwrap_or(seed);
            let images = cfg.train_images.as_ref().expect("validated");
            let raw = load_mnist_idx(images, cfg.train_labels.as_ref())?;
            let train = binarize_stochastic(&raw, bseed, Split::Train)?;
            let test = match &cfg.test_images {
                Some(p) => {
                    let raw = load_mnist_idx(p, cfg.test_labels.as_ref())?;
                    Some(binarize_stochastic(&raw, bseed.wrapping_add(1), Split::Test)?)
                }
                None => None,
            };
            let classes = train.classes().max(test.as_ref().map_or(0, |t| t.classes()));
            let train = with_classes(train, classes)?;
            let test = test.map(|t| with_classes(t, classes)).transpose()?;
            (train, None, test)
        }
        DataFormat::Bitmap => {
            let path = cfg.data_path.as_ref().expect("validated");
            let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
            let b = read_bitmap(&bytes)?;
            (b.train, non_empty(b.valid), non_empty(b.test))
        }
        DataFormat::Silhouettes => {
            let b = load_silhouettes(cfg.data_path.as_ref().expect("validated"))?;
            (b.train, non_empty(b.valid), non_empty(b.test))
        }
    };
    let mut train = truncate(train, cfg.train_subset);
    let test = test.map(|t| truncate(t, cfg.test_subset));
    if cfg.valid_fraction > 0.0 {
        let (t, v) = train.split_validation(cfg.valid_fraction, seed)?;
        train = t;
        valid = non_empty(v);
    }
    if train.is_empty() {
        return Err(CliError::Validation("training split is empty".into()));
    }
    Ok(Splits { train, valid, test })
}

pub fn parse_split(s: &str) -> Result<Split, CliError> {
    match s {
        "train" => Ok(Split::Train),
        "valid" => Ok(Split::Valid),
        "test" => Ok(Split::Test),
        _ => Err(CliError::Validation(format!(
            "split must be train, valid or test, got {s:?}"
        ))),
    }
}
