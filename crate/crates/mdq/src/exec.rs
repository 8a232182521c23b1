//! Chunked execution with a rayon or a sequential backend.
//!
//! Work over `0..n` is cut into fixed-size chunks whose boundaries depend
//! only on `n` and the chunk size. Results come back in chunk order, so any
//! reduction done by the caller is independent of the thread count.

use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Default chunk length for Monte Carlo loops.
pub const CHUNK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    /// Falls back to sequential when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk)).map(|c| c * chunk..((c + 1) * chunk).min(n)).collect()
}

/// Apply `f` to every chunk of `0..n`, returning results in chunk order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(n, chunk);
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            ranges.into_par_iter().map(f).collect()
        }
        _ => ranges.into_iter().map(f).collect(),
    }
}

/// Apply `f` to every item, preserving order.
pub fn map_items<I, T, F>(items: Vec<I>, mode: ExecMode, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_exactly() {
        let r = chunk_ranges(10, 4);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(chunk_ranges(0, 4).is_empty());
    }

    #[test]
    fn modes_agree() {
        let f = |r: Range<usize>| r.map(|i| i as u64 * 3).sum::<u64>();
        assert_eq!(map_chunks(1000, 7, ExecMode::Sequential, f), map_chunks(1000, 7, ExecMode::Parallel, f));
    }
}
