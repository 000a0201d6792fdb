//! Numerically stable scalar helpers shared by every probability computation.

use std::f64::consts::LN_2;

/// `log(1 + exp(x))` without overflow for large `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid `1 / (1 + exp(-x))`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum(exp(xs)))`; returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `log(mean(exp(xs)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// `log(r / (1 - r))` for `r = exp(ln_r)`, `ln_r < 0`: the log mass of the
/// geometric series `sum_{k>=1} r^k`.
#[inline]
pub fn ln_geometric_tail(ln_r: f64) -> f64 {
    debug_assert!(ln_r < 0.0);
    ln_r - (-ln_r.exp_m1()).ln()
}

/// Softmax of `logits` written into a new vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let norm = log_sum_exp(logits);
    logits.iter().map(|&x| (x - norm).exp()).collect()
}

/// Index of the largest value; ties resolve to the smallest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

pub(crate) const LN_TWO: f64 = LN_2;

/// `sum_j w[j] * v[j]` for a binary `v`.
#[inline]
pub(crate) fn dot_binary(w: &[f64], v: &[u8]) -> f64 {
    debug_assert_eq!(w.len(), v.len());
    let mut acc = 0.0;
    for (&wj, &vj) in w.iter().zip(v) {
        if vj != 0 {
            acc += wj;
        }
    }
    acc
}
