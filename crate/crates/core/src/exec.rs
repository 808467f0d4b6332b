//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) the batch helpers dispatch through
//! rayon; without it every call runs sequentially. Results always come back in
//! input order, so parallel and sequential runs are bit-identical.

/// How a batch of independent evaluations is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Falls back to [`Execution::Sequential`] when built without `parallel`.
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run batches in parallel.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_indices<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], exec: Execution, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_indices(items.len(), exec, |i| f(&items[i]))
}
