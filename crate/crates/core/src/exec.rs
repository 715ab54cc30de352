//! Deterministic data-parallel helpers.
//!
//! Every reduction in the crate goes through this module. Work is cut into
//! fixed-size chunks, each chunk is reduced sequentially, and the chunk
//! results are combined with a pairwise tree in index order. The chunking
//! does not depend on the thread count, so sequential and parallel runs
//! produce bit-identical results.
//!
//! With the `parallel` feature (on by default) chunks are processed on the
//! rayon pool; [`set_parallel`] switches to the sequential path at runtime,
//! which is what the benchmarks use to compare the two.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Number of items reduced sequentially inside one chunk.
pub const CHUNK: usize = 2048;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Enables or disables the rayon path at runtime.
///
/// Has no effect when the crate is built without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled, Ordering::Relaxed);
}

/// True when chunks are dispatched to the rayon pool.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Pairwise (tree) summation of a slice, in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn chunk_count(len: usize) -> usize {
    len.div_ceil(CHUNK)
}

fn chunk_bounds(chunk: usize, len: usize) -> std::ops::Range<usize> {
    let start = chunk * CHUNK;
    start..(start + CHUNK).min(len)
}

/// Maps every chunk index through `f`, preserving order.
fn map_chunks<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
{
    let chunks = chunk_count(len);
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() && chunks > 1 {
            return (0..chunks)
                .into_par_iter()
                .map(|c| f(chunk_bounds(c, len)))
                .collect();
        }
    }
    (0..chunks).map(|c| f(chunk_bounds(c, len))).collect()
}

/// Deterministic sum of `f(i)` for `i in 0..len`.
pub fn sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partial = map_chunks(len, |range| {
        let mut acc = 0.0;
        for i in range {
            acc += f(i);
        }
        acc
    });
    pairwise_sum(&partial)
}

/// Maximum of `f(i)` over `0..len`; `f64::NEG_INFINITY` for empty input.
///
/// NaN values propagate: if any term is NaN the result is NaN.
pub fn max_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partial = map_chunks(len, |range| {
        let mut acc = f64::NEG_INFINITY;
        for i in range {
            let v = f(i);
            if v.is_nan() || v > acc {
                acc = v;
            }
            if acc.is_nan() {
                break;
            }
        }
        acc
    });
    partial.into_iter().fold(f64::NEG_INFINITY, |a, b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

/// Collects `f(i)` for `i in 0..len` in index order.
pub fn collect_by<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let nested = map_chunks(len, |range| range.map(&f).collect::<Vec<T>>());
    let mut out = Vec::with_capacity(len);
    for part in nested {
        out.extend(part);
    }
    out
}

/// Applies `f(i, &mut out[i])` over a mutable output buffer.
pub fn fill_by<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if parallel_enabled() && out.len() > CHUNK {
            out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let base = c * CHUNK;
                for (j, slot) in chunk.iter_mut().enumerate() {
                    f(base + j, slot);
                }
            });
            return;
        }
    }
    for (i, slot) in out.iter_mut().enumerate() {
        f(i, slot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_agree_between_modes() {
        let f = |i: usize| ((i as f64) * 0.37).sin() / (1.0 + i as f64);
        set_parallel(true);
        let a = sum_by(100_000, f);
        set_parallel(false);
        let b = sum_by(100_000, f);
        set_parallel(true);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn empty_reductions() {
        assert_eq!(sum_by(0, |_| 1.0), 0.0);
        assert_eq!(max_by(0, |_| 1.0), f64::NEG_INFINITY);
        assert!(collect_by(0, |i| i).is_empty());
    }

    #[test]
    fn max_propagates_nan() {
        assert!(max_by(10, |i| if i == 7 { f64::NAN } else { i as f64 }).is_nan());
        assert_eq!(max_by(5000, |i| i as f64), 4999.0);
    }

    #[test]
    fn collect_preserves_order() {
        let v = collect_by(10_000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
