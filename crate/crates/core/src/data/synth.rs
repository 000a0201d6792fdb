use rand::Rng;

use super::{DataError, Dataset, Split};
use crate::rng::stream_rng;

/// Every distinct bars-and-stripes image on a `side x side` grid.
///
/// Row-type images (each row all on or all off) come first and are labeled
/// 0; column-type images not already listed are labeled 1. The blank and
/// full images appear once, as row type, so there are `2^(side+1) - 2`.
pub fn bars_and_stripes_patterns(side: usize) -> Vec<(Vec<u8>, usize)> {
    let mut out = Vec::new();
    for mask in 0..(1usize << side) {
        let img = (0..side * side)
            .map(|k| ((mask >> (k / side)) & 1) as u8)
            .collect();
        out.push((img, 0));
    }
    for mask in 1..(1usize << side) - 1 {
        let img = (0..side * side)
            .map(|k| ((mask >> (k % side)) & 1) as u8)
            .collect();
        out.push((img, 1));
    }
    out
}

/// `n` draws uniform over the distinct bars-and-stripes images.
pub fn synth_bars_and_stripes(side: usize, n: usize, seed: u64) -> Result<Dataset, DataError> {
    if side == 0 || side > 16 {
        return Err(DataError::Invalid(format!("side {side} not in 1..=16")));
    }
    let patterns = bars_and_stripes_patterns(side);
    let mut rng = stream_rng(seed, 0, 0);
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (img, label) = &patterns[rng.random_range(0..patterns.len())];
        examples.push(img.clone());
        labels.push(*label);
    }
    Dataset::new(examples, Some(labels), side * side, 2, Split::Train)
}

/// Random binary templates under cyclic 2-D shifts, with each pixel flipped
/// independently with probability `flip`. The label is the template index.
pub fn synth_shifted_patterns(
    side: usize,
    templates: usize,
    n: usize,
    flip: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if side == 0 || templates == 0 || !(0.0..=1.0).contains(&flip) {
        return Err(DataError::Invalid(format!(
            "side {side}, templates {templates}, flip {flip}"
        )));
    }
    let mut rng = stream_rng(seed, 0, 0);
    let bank: Vec<Vec<u8>> = (0..templates)
        .map(|_| (0..side * side).map(|_| rng.random_range(0..2u8)).collect())
        .collect();
    let mut examples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..templates);
        let (dr, dc) = (rng.random_range(0..side), rng.random_range(0..side));
        let img = (0..side * side)
            .map(|p| {
                let (r, c) = (p / side, p % side);
                let src = ((r + dr) % side) * side + (c + dc) % side;
                let bit = bank[k][src];
                if rng.random::<f64>() < flip {
                    1 - bit
                } else {
                    bit
                }
            })
            .collect();
        examples.push(img);
        labels.push(k);
    }
    Dataset::new(examples, Some(labels), side * side, templates, Split::Train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{HashMap, HashSet};

    #[test]
    fn pattern_count_is_two_pow_side_plus_one_minus_two() {
        for side in 1..=5 {
            let p = bars_and_stripes_patterns(side);
            let distinct: HashSet<&Vec<u8>> = p.iter().map(|(x, _)| x).collect();
            assert_eq!(distinct.len(), p.len());
            assert_eq!(p.len(), (1 << (side + 1)) - 2);
        }
        assert_eq!(bars_and_stripes_patterns(2).len(), 6);
    }

    #[test]
    fn every_pattern_is_rows_or_columns() {
        let side = 4;
        for (img, label) in bars_and_stripes_patterns(side) {
            let rows = (0..side).all(|r| (0..side).all(|c| img[r * side + c] == img[r * side]));
            let cols = (0..side).all(|r| (0..side).all(|c| img[r * side + c] == img[c]));
            assert!(rows || cols);
            assert_eq!(label == 0, rows);
        }
    }

    #[test]
    fn generator_is_uniform() {
        let n = 60_000;
        let d = synth_bars_and_stripes(2, n, 7).unwrap();
        let mut counts: HashMap<&[u8], usize> = HashMap::new();
        for x in d.examples() {
            *counts.entry(x.as_slice()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - n as f64 * p).abs() < 3.0 * sd + 1.0);
        }
        let big = synth_bars_and_stripes(4, 500, 1).unwrap();
        assert_eq!((big.len(), big.visible()), (500, 16));
    }

    #[test]
    fn shifted_patterns_without_noise_are_template_shifts() {
        let d = synth_shifted_patterns(5, 3, 100, 0.0, 2).unwrap();
        assert_eq!(d.classes(), 3);
        let ones: Vec<usize> = d
            .examples()
            .iter()
            .map(|x| x.iter().map(|&b| b as usize).sum())
            .collect();
        // A cyclic shift preserves the number of active pixels.
        for (i, x) in ones.iter().enumerate() {
            for (j, y) in ones.iter().enumerate() {
                if d.label(i) == d.label(j) {
                    assert_eq!(x, y);
                }
            }
        }
    }
}
