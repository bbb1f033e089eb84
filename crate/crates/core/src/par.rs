//! Chunked map over index ranges, run either on the rayon pool or inline.
//!
//! Chunk boundaries depend only on the input length and the chunk size, never
//! on the thread count, and results come back in chunk order. Callers reduce
//! them left to right, so both execution modes produce bit-identical sums.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether data-parallel loops run on the rayon pool.
///
/// `Parallel` silently runs inline when the crate is built without the
/// `parallel` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

fn ranges(len: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..len.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(len))
        .collect()
}

/// Applies `f` to consecutive ranges of `0..len`, returning results in order.
pub fn map_chunks<T, F>(len: usize, chunk: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let rs = ranges(len, chunk);
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => rs.into_par_iter().map(f).collect(),
        _ => rs.into_iter().map(f).collect(),
    }
}

/// Applies `f` to every item, returning results in input order.
pub fn map_items<I, T, F>(items: &[I], exec: Execution, f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_cover_input() {
        let rs = ranges(10, 4);
        assert_eq!(rs, vec![0..4, 4..8, 8..10]);
        assert!(ranges(0, 4).is_empty());
    }

    #[test]
    fn modes_agree() {
        let f = |r: Range<usize>| r.map(|i| (i as f64).sqrt()).sum::<f64>();
        let a = map_chunks(1000, 7, Execution::Sequential, f);
        let b = map_chunks(1000, 7, Execution::Parallel, f);
        assert_eq!(a, b);
    }
}
