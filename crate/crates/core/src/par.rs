//! Data-parallel dispatch. With the `parallel` feature (default) the mapping
//! helpers fan out over rayon; without it they run the same code sequentially.
//! Output order always matches input order, so results are identical either
//! way.

/// Number of worker threads to use. `Sequential` keeps everything on the
/// calling thread and never touches a thread pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jobs {
    Sequential,
    /// All available cores (rayon default pool).
    Auto,
    Threads(usize),
}

impl Jobs {
    pub fn from_flag(n: Option<usize>) -> Jobs {
        match n {
            None | Some(0) => Jobs::Auto,
            Some(1) => Jobs::Sequential,
            Some(n) => Jobs::Threads(n),
        }
    }
}

#[cfg(feature = "parallel")]
pub fn map_indexed<T, U, F>(jobs: Jobs, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    match jobs {
        Jobs::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        Jobs::Auto => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        Jobs::Threads(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool");
            pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, U, F>(_jobs: Jobs, items: &[T], f: F) -> Vec<U>
where
    F: Fn(usize, &T) -> U,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, U, F>(jobs: Jobs, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    map_indexed(jobs, items, |_, t| f(t))
}
