//! Data-parallel helpers with deterministic merge order.
//!
//! With the `parallel` feature (default) the mapping fans out over rayon;
//! results are collected back in input order, so outputs are identical to
//! the sequential fallback. `map_seq` is always available for comparison
//! benchmarks.

use crate::error::Result;

/// Map over items, in parallel when the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map over items, in parallel when the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Fallible map, short-circuiting on the first error.
#[cfg(feature = "parallel")]
pub fn try_map<T: Sync, U: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U> + Sync + Send,
) -> Result<Vec<U>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Fallible map, short-circuiting on the first error.
#[cfg(not(feature = "parallel"))]
pub fn try_map<T, U>(items: &[T], f: impl Fn(&T) -> Result<U>) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}

/// Always-sequential map, for benchmarking against the parallel path.
pub fn map_seq<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}

/// Always-sequential fallible map.
pub fn try_map_seq<T, U>(items: &[T], f: impl Fn(&T) -> Result<U>) -> Result<Vec<U>> {
    items.iter().map(f).collect()
}
