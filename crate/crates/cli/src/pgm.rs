//! Binary portable graymap (P5) export of image grids.

use std::path::Path;

use crate::error::{io_error, CliError};

/// Gray levels in `[0, 1]`, row-major.
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

pub fn encode(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(
        img.pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    out
}

pub fn write(img: &Image, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, encode(img)).map_err(|e| io_error(path, e))
}

/// Square-ish tile shape for `d` pixels: `sqrt(d)` when `d` is a perfect
/// square, otherwise a single row.
pub fn tile_shape(d: usize) -> (usize, usize) {
    let s = (d as f64).sqrt().round() as usize;
    if s * s == d {
        (s, s)
    } else {
        (d, 1)
    }
}

/// Lays `tiles` out in a grid with a one-pixel mid-gray border.
pub fn grid(tiles: &[Vec<f64>], tile_w: usize, tile_h: usize) -> Image {
    let n = tiles.len();
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let rows = n.div_ceil(cols).max(1);
    let width = cols * (tile_w + 1) + 1;
    let height = rows * (tile_h + 1) + 1;
    let mut pixels = vec![0.5; width * height];
    for (k, t) in tiles.iter().enumerate() {
        let (r0, c0) = ((k / cols) * (tile_h + 1) + 1, (k % cols) * (tile_w + 1) + 1);
        for y in 0..tile_h {
            for x in 0..tile_w {
                pixels[(r0 + y) * width + c0 + x] = t[y * tile_w + x];
            }
        }
    }
    Image {
        width,
        height,
        pixels,
    }
}

/// Rescales a filter to `[0, 1]` by its own range.
pub fn normalize(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    xs.iter()
        .map(|&x| if span > 0.0 { (x - lo) / span } else { 0.5 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_size() {
        let img = grid(&[vec![1.0; 4], vec![0.0; 4]], 2, 2);
        assert_eq!((img.width, img.height), (7, 4));
        let bytes = encode(&img);
        assert!(bytes.starts_with(b"P5\n7 4\n255\n"));
        assert_eq!(bytes.len(), b"P5\n7 4\n255\n".len() + 28);
    }

    #[test]
    fn shapes() {
        assert_eq!(tile_shape(784), (28, 28));
        assert_eq!(tile_shape(10), (10, 1));
        assert_eq!(normalize(&[1.0, 3.0]), vec![0.0, 1.0]);
    }
}
