//! Data-parallel map helpers.
//!
//! With the default `parallel` feature these fan out over rayon; without it
//! they run sequentially. Both paths produce identical output order, so every
//! caller stays deterministic either way. Callers must route any randomness
//! through per-index [`crate::rng::stream`] ids rather than sharing an RNG.
//!
//! Work is split into a bounded number of contiguous chunks rather than one
//! task per item: the per-item closures here are often sub-microsecond
//! (single utility evaluations), where per-task scheduling would cost more
//! than the work itself.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn chunk_size(n: usize) -> usize {
    let tasks = rayon::current_num_threads().max(1) * 4;
    n.div_ceil(tasks).max(1)
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let chunk = chunk_size(n);
        let starts: Vec<usize> = (0..n).step_by(chunk).collect();
        let mut out = Vec::with_capacity(n);
        let parts: Vec<Vec<U>> = starts
            .par_iter()
            .map(|&start| (start..(start + chunk).min(n)).map(&f).collect())
            .collect();
        for part in parts {
            out.extend(part);
        }
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Work floor below which fine-grained maps stay sequential: scheduling a
/// handful of sub-microsecond items costs more than running them inline.
const FINE_FLOOR: usize = 8192;

/// [`map_indices`] for per-item work in the nanosecond range: falls back to
/// the sequential path when `n` is small.
pub fn map_indices_fine<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= FINE_FLOOR {
            return map_indices(n, f);
        }
    }
    (0..n).map(f).collect()
}

/// [`map_slice`] for per-item work in the nanosecond range.
pub fn map_slice_fine<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if items.len() >= FINE_FLOOR {
            return map_slice(items, f);
        }
    }
    items.iter().map(f).collect()
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        let chunk = chunk_size(items.len().max(1));
        let mut out = Vec::with_capacity(items.len());
        let parts: Vec<Vec<U>> = items
            .par_chunks(chunk)
            .map(|part| part.iter().map(&f).collect())
            .collect();
        for part in parts {
            out.extend(part);
        }
        out
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
