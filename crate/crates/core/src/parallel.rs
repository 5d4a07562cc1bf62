use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "ROOTFOREST_THREADS";

fn pool() -> &'static ThreadPool {
    static POOL: OnceLock<ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut b = ThreadPoolBuilder::new();
        if let Some(k) = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
        {
            b = b.num_threads(k);
        }
        b.build().expect("thread pool")
    })
}

/// Run `f` inside the crate's worker pool.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    pool().install(f)
}

pub fn threads() -> usize {
    pool().current_num_threads()
}
