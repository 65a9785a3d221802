use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CPQSD_THREADS";

/// A worker pool whose `map` always returns results in index order.
pub struct Parallelism {
    pool: ThreadPool,
    threads: usize,
}

impl Parallelism {
    pub fn new(threads: usize) -> Self {
        let threads = threads.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to build worker pool");
        Parallelism { pool, threads }
    }

    /// Reads `CPQSD_THREADS`, falling back to the available parallelism.
    pub fn from_env() -> Self {
        let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or(default);
        Self::new(threads)
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.threads == 1 {
            return (0..n).map(f).collect();
        }
        self.pool.install(|| (0..n).into_par_iter().map(&f).collect())
    }

    /// In-place parallel update of a slice; element `i` sees only itself.
    pub fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        if self.threads == 1 {
            items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
        self.pool
            .install(|| items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x)));
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::from_env()
    }
}
