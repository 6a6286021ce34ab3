//! Data-parallel helpers.
//!
//! With the `parallel` feature (the default) these run on rayon; without it
//! they fall back to plain sequential iteration with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }

    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Folds chunks independently and merges the partial results. `merge` must be
/// associative with `identity` as its unit.
pub fn fold_merge<T, A, I, F, M>(items: &[T], identity: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &T) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().fold(&identity, fold).reduce(&identity, merge)
    }

    #[cfg(not(feature = "parallel"))]
    {
        let _ = merge;
        items.iter().fold(identity(), fold)
    }
}

/// Runs `op` with at most `threads` workers available to the helpers above.
pub fn with_threads<R, F>(threads: usize, op: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
        {
            Ok(pool) => pool.install(op),
            Err(err) => {
                log::warn!("could not build a {threads}-thread pool ({err}); using the global pool");
                op()
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        op()
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
