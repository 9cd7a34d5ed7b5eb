//! Replicate-parallel evaluation with order-preserving collection.

use rayon::prelude::*;

use crate::rng::Stream;

/// Evaluates `f(i, stream_i)` for `i in 0..reps`, where `stream_i` is
/// `base.fork(i)`. The output is in replicate order regardless of how the
/// work is scheduled.
pub fn replicate<T, F>(reps: usize, base: &Stream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Stream) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut s = base.fork(i as u64);
            f(i, &mut s)
        })
        .collect()
}

/// Like [`replicate`] for fallible work. The first error in replicate
/// order is returned.
pub fn try_replicate<T, F>(reps: usize, base: &Stream, f: F) -> crate::Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut Stream) -> crate::Result<T> + Sync + Send,
{
    replicate(reps, base, f).into_iter().collect()
}

/// Runs `f` inside a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
