use std::path::Path;

use rand::Rng;

use super::{DataError, Dataset, Split};
use crate::rng::stream_rng;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Grayscale intensities in `[0, 1]`, rows flattened one after another.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub rows: usize,
    pub cols: usize,
    pub classes: usize,
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        if self.bytes.len() - self.offset < n {
            return Err(DataError::Truncated {
                offset: self.offset,
                needed: n,
                available: self.bytes.len() - self.offset,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32_be(&mut self) -> Result<u32, DataError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<(), DataError> {
        if self.offset != self.bytes.len() {
            return Err(DataError::TrailingBytes {
                offset: self.offset,
                extra: self.bytes.len() - self.offset,
            });
        }
        Ok(())
    }
}

/// Parses an IDX image file into `(images, rows, cols)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Vec<Vec<f64>>, usize, usize), DataError> {
    let mut r = Reader { bytes, offset: 0 };
    let magic = r.u32_be()?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            expected: IMAGE_MAGIC,
            got: magic,
        });
    }
    let n = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let mut images = Vec::with_capacity(n);
    for _ in 0..n {
        let px = r.take(rows * cols)?;
        images.push(px.iter().map(|&b| f64::from(b) / 255.0).collect());
    }
    r.finish()?;
    Ok((images, rows, cols))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>, DataError> {
    let mut r = Reader { bytes, offset: 0 };
    let magic = r.u32_be()?;
    if magic != LABEL_MAGIC {
        return Err(DataError::BadMagic {
            expected: LABEL_MAGIC,
            got: magic,
        });
    }
    let n = r.u32_be()? as usize;
    let labels = r.take(n)?.iter().map(|&b| usize::from(b)).collect();
    r.finish()?;
    Ok(labels)
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: Option<impl AsRef<Path>>,
) -> Result<RawDataset, DataError> {
    let (images, rows, cols) = parse_idx_images(&read(images_path.as_ref())?)?;
    let labels = match labels_path {
        None => None,
        Some(p) => {
            let labels = parse_idx_labels(&read(p.as_ref())?)?;
            if labels.len() != images.len() {
                return Err(DataError::CountMismatch {
                    images: images.len(),
                    labels: labels.len(),
                });
            }
            Some(labels)
        }
    };
    let classes = labels
        .as_ref()
        .map_or(0, |l| l.iter().max().map_or(0, |&m| m + 1));
    Ok(RawDataset {
        images,
        labels,
        rows,
        cols,
        classes,
    })
}

/// Each pixel becomes 1 with probability equal to its intensity. The draw is
/// made once, so the result is a fixed binary dataset.
pub fn binarize_stochastic(raw: &RawDataset, seed: u64, split: Split) -> Result<Dataset, DataError> {
    let mut rng = stream_rng(seed, 0, 0);
    let mut examples = Vec::with_capacity(raw.images.len());
    for (index, img) in raw.images.iter().enumerate() {
        if let Some(&value) = img.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(DataError::Intensity { index, value });
        }
        examples.push(
            img.iter()
                .map(|&p| u8::from(rng.random::<f64>() < p))
                .collect(),
        );
    }
    Dataset::new(
        examples,
        raw.labels.clone(),
        raw.rows * raw.cols,
        raw.classes,
        split,
    )
}
