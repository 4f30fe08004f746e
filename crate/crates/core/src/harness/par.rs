//! Order-preserving map over independent jobs.
//!
//! With the `parallel` feature, jobs run on a dedicated rayon pool of the
//! requested size; otherwise, and whenever one worker is requested, they run
//! in order on the calling thread. Results come back in input order either
//! way.

/// Number of workers to use when none is configured.
pub fn default_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

pub fn map_ordered<T, R, F>(items: Vec<T>, workers: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if workers > 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => return pool.install(|| items.into_par_iter().map(&f).collect()),
            Err(e) => log_pool_failure(&e),
        }
    }
    let _ = workers;
    items.into_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
fn log_pool_failure(e: &rayon::ThreadPoolBuildError) {
    eprintln!("warning: could not build worker pool ({e}); running sequentially");
}
