//! Execution strategy for the embarrassingly parallel outer loops
//! (cross-validation tasks, benchmark replicates).
//!
//! Results are always collected in index order, so the parallel and
//! sequential paths produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses the rayon global pool when the `parallel` feature is enabled,
    /// otherwise identical to `Sequential`.
    #[default]
    Parallel,
}

/// Evaluates `f(0..len)` and returns the results in index order.
pub fn map_indexed<R, F>(len: usize, execution: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match execution {
        Execution::Sequential => (0..len).map(f).collect(),
        Execution::Parallel => par_map(len, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..len).map(f).collect()
}
