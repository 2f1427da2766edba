//! Ordered map over a slice, data-parallel when the `parallel` feature is on.
//!
//! Every batch loop in the crate goes through [`map_ordered`] so that the
//! output order always matches the input order, regardless of how work was
//! scheduled. Without the `parallel` feature [`Execution::Parallel`] quietly
//! degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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

pub fn map_ordered<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Like [`map_ordered`] for fallible work; the first error in input order wins.
pub fn try_map_ordered<T, U, E, F>(items: &[T], exec: Execution, f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    map_ordered(items, exec, f).into_iter().collect()
}

/// Runs `op` inside a dedicated pool of `workers` threads.
///
/// `None` uses the global pool. Sequential builds ignore the worker count.
pub fn with_workers<R: Send>(workers: Option<usize>, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(n) = workers {
        match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => return pool.install(op),
            Err(e) => log::warn!("could not build a {n}-thread pool ({e}); using the global pool"),
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    op()
}
