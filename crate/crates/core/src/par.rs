//! Index-parallel maps. Output order always follows the index order.

use alloc::vec::Vec;

#[cfg(feature = "std")]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "std"))]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Like [`map_indices`] but stops on the first error in index order.
pub fn try_map_indices<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indices(n, f).into_iter().collect()
}

/// Maps every index and folds the results with `combine`.
///
/// The reduction tree depends on the thread pool, so `combine` must be
/// associative and commutative in exact arithmetic (integer counts, not
/// floating-point sums) for the result to be reproducible.
#[cfg(feature = "std")]
pub fn map_reduce_indices<T, F, C>(
    n: usize,
    identity: impl Fn() -> T + Sync + Send,
    f: F,
    combine: C,
) -> T
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).reduce(identity, combine)
}

#[cfg(not(feature = "std"))]
pub fn map_reduce_indices<T, F, C>(
    n: usize,
    identity: impl Fn() -> T + Sync + Send,
    f: F,
    combine: C,
) -> T
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    (0..n).map(f).fold(identity(), combine)
}
