//! Binary datasets: IDX ingestion with stochastic binarization, the packed
//! bitmap container, and synthetic pattern families.

mod bitmap;
mod idx;
mod synth;

pub use bitmap::{load_silhouettes, read_bitmap, write_bitmap, BitmapBundle, SILHOUETTE_SIZES};
pub use idx::{binarize_stochastic, load_mnist_idx, parse_idx_images, parse_idx_labels, RawDataset};
pub use synth::{bars_and_stripes_patterns, synth_bars_and_stripes, synth_shifted_patterns};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Label;
use crate::rng::{kind_rng, StreamKind};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic number {got:#010x} at byte 0, expected {expected:#010x}")]
    BadMagic { expected: u32, got: u32 },
    #[error("file truncated: needed {needed} bytes at byte offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{extra} unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("{split} split has {got} examples, expected {expected}")]
    SplitSize {
        split: Split,
        expected: usize,
        got: usize,
    },
    #[error("dimension {got} does not match expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("example {index} has length {got}, dataset dimension is {expected}")]
    Ragged {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("example {index} has non-binary entry {value}")]
    NonBinary { index: usize, value: u8 },
    #[error("label {label} of example {index} out of range for {classes} classes")]
    LabelRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("intensity {value} of example {index} outside [0, 1]")]
    Intensity { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

/// Binary examples of a shared dimension, optionally labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    examples: Vec<Vec<u8>>,
    labels: Option<Vec<Label>>,
    split: Split,
    visible: usize,
    classes: usize,
}

impl Dataset {
    /// `classes = 0` means unlabeled; `labels` must then be `None`.
    pub fn new(
        examples: Vec<Vec<u8>>,
        labels: Option<Vec<usize>>,
        visible: usize,
        classes: usize,
        split: Split,
    ) -> Result<Self, DataError> {
        for (index, x) in examples.iter().enumerate() {
            if x.len() != visible {
                return Err(DataError::Ragged {
                    index,
                    expected: visible,
                    got: x.len(),
                });
            }
            if let Some(&value) = x.iter().find(|&&b| b > 1) {
                return Err(DataError::NonBinary { index, value });
            }
        }
        let labels = match labels {
            None => None,
            Some(ls) => {
                if ls.len() != examples.len() {
                    return Err(DataError::CountMismatch {
                        images: examples.len(),
                        labels: ls.len(),
                    });
                }
                let mut out = Vec::with_capacity(ls.len());
                for (index, &label) in ls.iter().enumerate() {
                    let l = Label::new(label, classes).map_err(|_| DataError::LabelRange {
                        index,
                        label,
                        classes,
                    })?;
                    out.push(l);
                }
                Some(out)
            }
        };
        Ok(Self {
            examples,
            labels,
            split,
            visible,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    /// Number of classes, 0 when unlabeled.
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn examples(&self) -> &[Vec<u8>] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &[u8] {
        &self.examples[i]
    }

    pub fn labels(&self) -> Option<&[Label]> {
        self.labels.as_deref()
    }

    pub fn label(&self, i: usize) -> Option<Label> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Same examples with labels dropped.
    pub fn unlabeled(&self) -> Dataset {
        Dataset {
            examples: self.examples.clone(),
            labels: None,
            split: self.split,
            visible: self.visible,
            classes: 0,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            split: self.split,
            visible: self.visible,
            classes: self.classes,
        }
    }

    /// Shuffled example order for `epoch`, reproducible from `seed`.
    pub fn epoch_order(&self, seed: u64, epoch: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut kind_rng(seed, epoch, StreamKind::Shuffle, 0));
        order
    }

    /// Holds out `fraction` of the examples (after a seeded shuffle) as a
    /// validation split.
    pub fn split_validation(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), DataError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(DataError::Invalid(format!(
                "validation fraction {fraction} not in [0, 1)"
            )));
        }
        let order = self.epoch_order(seed, u64::MAX);
        let n_valid = (fraction * self.len() as f64).round() as usize;
        let (valid, train) = order.split_at(n_valid);
        let mut train: Vec<usize> = train.to_vec();
        let mut valid: Vec<usize> = valid.to_vec();
        train.sort_unstable();
        valid.sort_unstable();
        Ok((
            self.subset(&train).with_split(Split::Train),
            self.subset(&valid).with_split(Split::Valid),
        ))
    }

    /// Per-dimension mean of the examples.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.visible];
        for x in &self.examples {
            for (mj, &b) in m.iter_mut().zip(x) {
                *mj += f64::from(b);
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}
