//! Sequential/parallel dispatch for the data-parallel loops.
//!
//! Every parallel routine in the crate computes per-item results
//! independently and reduces them in index order, so both execution modes
//! give bit-identical output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Requested execution mode. `Parallel` silently degrades to sequential
/// when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Map `0..len` through `op`, preserving order.
pub(crate) fn map_indexed<T, F>(exec: Execution, len: usize, op: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..len).into_par_iter().with_min_len(64).map(op).collect();
    }
    let _ = exec;
    (0..len).map(op).collect()
}

/// Apply `op(index, &mut item)` to every element of `items`.
pub(crate) fn for_each_mut<T, F>(exec: Execution, items: &mut [T], min_len: usize, op: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= 2 * min_len {
        items
            .par_iter_mut()
            .with_min_len(min_len)
            .enumerate()
            .for_each(|(j, x)| op(j, x));
        return;
    }
    let _ = (exec, min_len);
    items.iter_mut().enumerate().for_each(|(j, x)| op(j, x));
}
