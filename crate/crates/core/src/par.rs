//! Data-parallel helpers with a sequential fallback.
//!
//! With the `rayon` feature enabled (the default) these dispatch onto the
//! current rayon pool; without it they run on the calling thread. Callers
//! must not rely on evaluation order: every reduction in this crate is keyed
//! by candidate index so results are schedule independent.

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Maps `f` over `0..len` and collects the results in index order.
pub fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "rayon")]
    return (0..len).into_par_iter().map(f).collect();
    #[cfg(not(feature = "rayon"))]
    return (0..len).map(f).collect();
}

/// Maps `f` over a slice and collects the results in slice order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "rayon")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "rayon"))]
    return items.iter().map(f).collect();
}

/// Runs `f` with at most `workers` threads.
///
/// `workers == 0` means "use the ambient pool". Without the `rayon` feature
/// this is a plain call.
pub fn with_workers<T, F>(workers: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    #[cfg(feature = "rayon")]
    {
        if workers == 0 {
            return f();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("failed to build a {workers}-thread pool ({e}); using the global pool");
                f()
            }
        }
    }
    #[cfg(not(feature = "rayon"))]
    {
        let _ = workers;
        f()
    }
}

/// Number of threads the current context would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "rayon")]
    return rayon::current_num_threads();
    #[cfg(not(feature = "rayon"))]
    return 1;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn single_worker_pool_matches_default() {
        let a = with_workers(1, || map_slice(&[1.0f64, 2.0, 3.0], |x| x.sqrt()));
        let b = map_slice(&[1.0f64, 2.0, 3.0], |x| x.sqrt());
        assert_eq!(a, b);
    }
}
