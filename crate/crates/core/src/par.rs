//! Deterministic parallel reductions.
//!
//! Floating point addition is not associative, so a work-stealing reduction
//! can return different bits from run to run. Reductions here split the index
//! range into fixed-size blocks, sum each block sequentially in parallel, and
//! then add the block sums in order. The result depends only on the input.

use rayon::prelude::*;

use crate::Real;

const BLOCK: usize = 2048;

/// `Σ_{i<n} term(i)` with a thread-count independent summation order.
pub fn sum<T: Real>(n: usize, term: impl Fn(usize) -> T + Sync) -> T {
    if n <= BLOCK {
        return (0..n).map(&term).fold(T::zero(), |a, b| a + b);
    }
    let blocks = n.div_ceil(BLOCK);
    let partial: Vec<T> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            (lo..hi).map(&term).fold(T::zero(), |a, b| a + b)
        })
        .collect();
    partial.into_iter().fold(T::zero(), |a, b| a + b)
}

/// `max_{i<n} term(i)`, or zero for an empty range. NaN terms propagate.
pub fn max<T: Real>(n: usize, term: impl Fn(usize) -> T + Sync) -> T {
    (0..n).into_par_iter().map(&term).reduce(T::zero, |a, b| {
        if a.is_nan() {
            a
        } else if b.is_nan() || b > a {
            b
        } else {
            a
        }
    })
}
