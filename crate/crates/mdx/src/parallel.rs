//! Thread pool sized by `RHOTIC_MDX_THREADS`.

pub const THREADS_ENV: &str = "RHOTIC_MDX_THREADS";

/// Worker count: the environment cap when set to a positive integer,
/// otherwise the available parallelism.
pub fn threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a pool of [`threads`] workers.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads()).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
