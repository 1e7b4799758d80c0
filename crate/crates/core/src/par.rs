//! Execution dispatch for the data-parallel loops.
//!
//! With the `parallel` feature (on by default) the helpers here fan work out
//! over rayon's pool. Without it, or inside [`run_sequential`], they run on the
//! calling thread. Every helper fixes its chunking independently of the thread
//! count, so floating-point reductions produce the same bits either way.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Chunk length used by the deterministic reductions.
pub const REDUCE_CHUNK: usize = 4096;

/// Runs `f` with every helper in this module pinned to the calling thread.
pub fn run_sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let _restore = Restore(prev);
    f()
}

/// True when the helpers would dispatch to the thread pool from here.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Runs `f` inside a pool capped at `threads` workers (0 means the default pool).
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
        f()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Number of workers the current context would use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            return rayon::current_num_threads();
        }
    }
    1
}

/// `(0..n).map(f).collect()`, order preserved.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Like [`map_range`] but each worker gets scratch state built by `init`.
pub fn map_range_init<T, S, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n)
                .into_par_iter()
                .map_init(&init, |s, i| f(s, i))
                .collect();
        }
    }
    let mut state = init();
    (0..n).map(|i| f(&mut state, i)).collect()
}

/// Order-preserving map over a slice.
pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
where
    A: Sync,
    T: Send,
    F: Fn(&A) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Fills `out[i] = f(i)`.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
            return;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Sum with a fixed chunk layout: chunks are summed left to right, then the
/// chunk totals are summed left to right.
pub fn sum_f64(values: &[f64]) -> f64 {
    let partials = map_range(values.len().div_ceil(REDUCE_CHUNK), |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(values.len());
        values[lo..hi].iter().sum::<f64>()
    });
    partials.iter().sum()
}

/// Deterministic sum of `f(i)` for `i in 0..n`, chunked like [`sum_f64`].
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let partials = map_range(n.div_ceil(REDUCE_CHUNK), |c| {
        let lo = c * REDUCE_CHUNK;
        let hi = (lo + REDUCE_CHUNK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    });
    partials.iter().sum()
}

/// Folds `blocks` independent work items into an accumulator.
///
/// Each block produces a partial with `work`; partials are merged into the
/// accumulator strictly in block order, in waves sized to the pool so that at
/// most a pool's worth of partials is alive at once.
pub fn fold_blocks_ordered<P, S, I, W, M>(
    blocks: usize,
    init: I,
    work: W,
    acc: &mut S,
    mut merge: M,
) where
    P: Send,
    S: Send,
    I: Fn() -> P + Sync + Send,
    W: Fn(&mut P, usize) + Sync + Send,
    M: FnMut(&mut S, P),
{
    let wave = current_threads().max(1) * 2;
    let mut start = 0;
    while start < blocks {
        let end = (start + wave).min(blocks);
        let partials = map_range(end - start, |k| {
            let mut p = init();
            work(&mut p, start + k);
            p
        });
        for p in partials {
            merge(acc, p);
        }
        start = end;
    }
}

/// Fold/reduce for exact (integer) accumulations where merge order does not
/// matter. Each worker folds a private accumulator from `init`.
pub fn fold_reduce<S, I, F, M>(n: usize, init: I, fold: F, merge: M) -> S
where
    S: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) + Sync + Send,
    M: Fn(S, S) -> S + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n)
                .into_par_iter()
                .fold(&init, |mut s, i| {
                    fold(&mut s, i);
                    s
                })
                .reduce(&init, &merge);
        }
    }
    let _ = &merge;
    let mut s = init();
    for i in 0..n {
        fold(&mut s, i);
    }
    s
}

/// Unstable sort, parallel when enabled.
pub fn sort_unstable<T: Ord + Send>(v: &mut [T]) {
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            v.par_sort_unstable();
            return;
        }
    }
    v.sort_unstable();
}
