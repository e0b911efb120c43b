//! Index-ordered map over work items, parallel when the `parallel` feature
//! is enabled and sequential otherwise.
//!
//! Results always come back in index order, so callers aggregate the same
//! way regardless of worker count.

/// Whether this build can evaluate on more than one worker.
pub fn is_parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// `(0..count).map(f)` on up to `workers` threads. `workers <= 1` (or a build
/// without the `parallel` feature) runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn map_indexed<U, F>(count: usize, workers: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<U, F>(count: usize, _workers: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..count).map(f).collect()
}
