//! Fixed-shape pairwise summation.
//!
//! The reduction tree depends only on the slice length: split at the midpoint
//! until a block holds at most `LEAF` values, sum leaves left to right. The
//! parallel variant walks the same tree, so its result is bit-identical to the
//! sequential one for any thread count.

const LEAF: usize = 32;
const PAR_THRESHOLD: usize = 1 << 15;

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, &v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

pub fn par_pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAR_THRESHOLD {
        return pairwise_sum(values);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    let (a, b) = rayon::join(|| par_pairwise_sum(lo), || par_pairwise_sum(hi));
    a + b
}

pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}
