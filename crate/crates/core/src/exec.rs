//! Execution facade: data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default) [`par_map`] fans work out over rayon and
//! collects results in input order, so reductions downstream see a deterministic
//! sequence. Without the feature it degrades to a plain sequential map — same
//! results, one thread. [`seq_map`] is always sequential; benchmarks use the pair to
//! compare the two paths on identical inputs.
//!
//! Work items must not share mutable state or a common RNG: callers derive a seed
//! per item (see `rng::derive`) before mapping.

/// Map `f` over `items`, in parallel when the `parallel` feature is enabled.
/// Output order matches input order.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential map with the same signature as [`par_map`].
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Number of worker threads the parallel path will use.
///
/// Honors `TABSHIFT_THREADS` (or rayon's own `RAYON_NUM_THREADS`) when set; purely
/// informational for the sequential build.
pub fn effective_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("TABSHIFT_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n >= 1 {
                    return n;
                }
            }
        }
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Install a global rayon pool sized from `TABSHIFT_THREADS` if the variable is set.
/// Call once at process start (the CLI does); later calls are no-ops.
pub fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    {
        if let Ok(v) = std::env::var("TABSHIFT_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                if n >= 1 {
                    // Ignore the error: the pool may already be initialised.
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let par = par_map(&items, |x| x * 3 + 1);
        let seq = seq_map(&items, |x| x * 3 + 1);
        assert_eq!(par, seq);
    }
}
