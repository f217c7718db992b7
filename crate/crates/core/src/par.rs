//! Data-parallel helpers. With the `parallel` feature (default) independent
//! work items run on the rayon pool; without it, or with
//! [`Execution::Sequential`], they run in order on the calling thread.
//! Results are always returned in input order, so reductions over them are
//! independent of scheduling.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// `true` when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// `f(0), f(1), ..., f(n - 1)`.
pub fn map_indices<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

pub fn map_slice<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indices(exec, items.len(), |i| f(&items[i]))
}
