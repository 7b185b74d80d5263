//! Order-preserving map over a slice, parallel when the `parallel` feature
//! is enabled and more than one worker is requested.

/// Worker count: 0 means one per available core, 1 forces sequential execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Parallelism(pub usize);

impl Parallelism {
    pub const SEQUENTIAL: Parallelism = Parallelism(1);
    pub const ALL_CORES: Parallelism = Parallelism(0);

    pub fn is_sequential(self) -> bool {
        self.0 == 1 || !cfg!(feature = "parallel")
    }
}

/// Applies `f(index, item)` to every item; output order equals input order.
pub fn map_ordered<T, R, F>(items: &[T], parallelism: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    if parallelism.is_sequential() || items.len() < 2 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    parallel_map(items, parallelism, f)
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], parallelism: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    use rayon::prelude::*;

    let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    if parallelism.0 == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism.0).build() {
        Ok(pool) => pool.install(run),
        Err(e) => {
            log::warn!("cannot build {}-thread pool ({e}); using global pool", parallelism.0);
            run()
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], _parallelism: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
