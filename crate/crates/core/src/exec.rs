//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) work runs on a rayon pool sized by
//! [`Execution::Parallel`]; without it every call runs sequentially. Results
//! are always returned in index order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `threads == 0` uses rayon's default pool size.
    Parallel { threads: usize },
}

impl Execution {
    pub fn parallel() -> Execution {
        Execution::Parallel { threads: 0 }
    }

    pub fn with_threads(threads: usize) -> Execution {
        if threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { threads }
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::parallel()
        } else {
            Execution::Sequential
        }
    }
}

/// `(0..n).map(f)` under the requested execution mode.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel { threads } => parallel_map(n, threads, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if threads == 0 {
        return (0..n).into_par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(n: usize, _threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| i * i + 1;
        let seq = map_indexed(1000, Execution::Sequential, f);
        assert_eq!(seq, map_indexed(1000, Execution::parallel(), f));
        assert_eq!(seq, map_indexed(1000, Execution::with_threads(3), f));
    }
}
