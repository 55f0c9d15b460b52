//! Execution-mode switch for the data-parallel inner loops.
//!
//! Independent runs, sweep points, and MDP instances are mapped through
//! [`map_indexed`], which dispatches to rayon when the `parallel` feature is
//! enabled and the caller asks for it, and to a plain sequential loop
//! otherwise. Results come back in index order either way, so the choice of
//! mode never changes output bytes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Deserialize;

/// How to execute a batch of independent jobs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    /// Use the rayon thread pool (falls back to sequential when the crate
    /// was built without the `parallel` feature).
    #[default]
    Parallel,
    /// Run jobs one after another on the calling thread.
    Sequential,
}

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => (0..n).map(f).collect(),
    }
}
