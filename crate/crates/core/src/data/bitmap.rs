//! The packed bitmap container: magic `IBMP`, little-endian `u32` version,
//! dimension, class count and the three split sizes, then every label as a
//! `u16` (train, valid, test order; absent when the class count is 0), then
//! every example bit-packed MSB first and padded to a whole byte.

use std::path::Path;

use super::{DataError, Dataset, Split};

const MAGIC: &[u8; 4] = b"IBMP";
const VERSION: u32 = 1;

/// Expected `(train, valid, test)` sizes, dimension and classes of the
/// silhouette benchmark.
pub const SILHOUETTE_SIZES: ([usize; 3], usize, usize) = ([4100, 2264, 2307], 784, 101);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitmapBundle {
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
}

impl BitmapBundle {
    fn splits(&self) -> [&Dataset; 3] {
        [&self.train, &self.valid, &self.test]
    }
}

pub fn write_bitmap(bundle: &BitmapBundle) -> Result<Vec<u8>, DataError> {
    let d = bundle.train.visible();
    let c = bundle.train.classes();
    for s in bundle.splits() {
        if s.visible() != d {
            return Err(DataError::Dimension {
                expected: d,
                got: s.visible(),
            });
        }
        if s.classes() != c || (c > 0) != s.labels().is_some() {
            return Err(DataError::Invalid(
                "all splits must share the class count and labeling".into(),
            ));
        }
    }
    if c > usize::from(u16::MAX) + 1 {
        return Err(DataError::Invalid(format!("{c} classes do not fit a u16 label")));
    }
    let row_bytes = d.div_ceil(8);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for x in [VERSION, d as u32, c as u32] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    for s in bundle.splits() {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    }
    for s in bundle.splits() {
        for l in s.labels().unwrap_or(&[]) {
            out.extend_from_slice(&(l.index() as u16).to_le_bytes());
        }
    }
    for s in bundle.splits() {
        for x in s.examples() {
            let mut row = vec![0u8; row_bytes];
            for (j, &b) in x.iter().enumerate() {
                row[j / 8] |= b << (7 - j % 8);
            }
            out.extend_from_slice(&row);
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DataError> {
        let available = self.bytes.len() - self.offset;
        if available < n {
            return Err(DataError::Truncated {
                offset: self.offset,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32_le(&mut self) -> Result<u32, DataError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_bitmap(bytes: &[u8]) -> Result<BitmapBundle, DataError> {
    let mut r = Cursor { bytes, offset: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(DataError::BadMagic {
            expected: u32::from_be_bytes(*MAGIC),
            got: u32::from_be_bytes([magic[0], magic[1], magic[2], magic[3]]),
        });
    }
    let version = r.u32_le()?;
    if version != VERSION {
        return Err(DataError::Version(version));
    }
    let d = r.u32_le()? as usize;
    let c = r.u32_le()? as usize;
    let counts = [r.u32_le()? as usize, r.u32_le()? as usize, r.u32_le()? as usize];
    let mut labels: [Option<Vec<usize>>; 3] = [None, None, None];
    if c > 0 {
        for (slot, &n) in labels.iter_mut().zip(&counts) {
            let raw = r.take(2 * n)?;
            *slot = Some(
                raw.chunks_exact(2)
                    .map(|b| usize::from(u16::from_le_bytes([b[0], b[1]])))
                    .collect(),
            );
        }
    }
    let row_bytes = d.div_ceil(8);
    let mut sets = Vec::with_capacity(3);
    for ((&n, split), lab) in counts
        .iter()
        .zip([Split::Train, Split::Valid, Split::Test])
        .zip(labels)
    {
        let mut examples = Vec::with_capacity(n);
        for _ in 0..n {
            let row = r.take(row_bytes)?;
            examples.push((0..d).map(|j| (row[j / 8] >> (7 - j % 8)) & 1).collect());
        }
        sets.push(Dataset::new(examples, lab, d, c, split)?);
    }
    if r.offset != bytes.len() {
        return Err(DataError::TrailingBytes {
            offset: r.offset,
            extra: bytes.len() - r.offset,
        });
    }
    let test = sets.pop().expect("three splits");
    let valid = sets.pop().expect("three splits");
    let train = sets.pop().expect("three splits");
    Ok(BitmapBundle { train, valid, test })
}

/// Reads the silhouette benchmark and checks its published split sizes,
/// dimension and class count.
pub fn load_silhouettes(path: impl AsRef<Path>) -> Result<BitmapBundle, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bundle = read_bitmap(&bytes)?;
    let (sizes, d, c) = SILHOUETTE_SIZES;
    if bundle.train.visible() != d {
        return Err(DataError::Dimension {
            expected: d,
            got: bundle.train.visible(),
        });
    }
    if bundle.train.classes() != c {
        return Err(DataError::Invalid(format!(
            "expected {c} classes, header declares {}",
            bundle.train.classes()
        )));
    }
    for (s, expected) in bundle.splits().into_iter().zip(sizes) {
        if s.len() != expected {
            return Err(DataError::SplitSize {
                split: s.split(),
                expected,
                got: s.len(),
            });
        }
    }
    Ok(bundle)
}
