//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] fans
//! work out over the rayon pool. Without it, every call runs sequentially.
//! Results are always returned in index order so callers never observe
//! scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run work in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluates `f(0), ..., f(len - 1)` and collects the results in order.
pub fn map_indexed<T, F>(execution: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution.is_parallel() {
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = execution;
    (0..len).map(f).collect()
}

/// Runs `f` inside a pool limited to `jobs` threads (`None` keeps the
/// global pool). Sequential builds ignore the limit.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = jobs {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let serial = map_indexed(Execution::Serial, 100, |i| i * i);
        let parallel = map_indexed(Execution::Parallel, 100, |i| i * i);
        assert_eq!(serial, parallel);
        assert_eq!(serial[9], 81);
    }

    #[test]
    fn jobs_limit_runs_closure() {
        assert_eq!(with_jobs(Some(2), || 5), 5);
        assert_eq!(with_jobs(None, || 6), 6);
    }
}
