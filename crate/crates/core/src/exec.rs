//! Data-parallel execution helpers.
//!
//! Every helper returns results in input order and performs reductions in a
//! fixed order, so output never depends on the thread count. With the
//! `parallel` feature disabled, or when the active rayon pool has a single
//! thread, the helpers run as plain sequential loops.

use std::ops::Range;

/// Rows per block for blocked reductions. Fixed so that the summation order
/// (and therefore every floating-point result) is independent of threading.
pub const ROW_BLOCK: usize = 16_384;

#[cfg(feature = "parallel")]
fn go_parallel(len: usize) -> bool {
    len > 1 && rayon::current_num_threads() > 1
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if go_parallel(n) {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// `items.iter().map(f).collect()`, possibly in parallel.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if go_parallel(items.len()) {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    items.iter().map(f).collect()
}

/// Mutates each element of `items` in place, possibly in parallel.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if go_parallel(items.len()) {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, t)| f(i, t));
            return;
        }
    }
    items.iter_mut().enumerate().for_each(|(i, t)| f(i, t));
}

/// Blocked fold over `0..n`: each [`ROW_BLOCK`]-sized range is folded into a
/// fresh accumulator, then the partials are merged left to right.
pub fn fold_blocks<T, I, F, M>(n: usize, init: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, Range<usize>) + Sync + Send,
    M: Fn(&mut T, T),
{
    let blocks = n.div_ceil(ROW_BLOCK).max(1);
    if blocks == 1 {
        let mut acc = init();
        fold(&mut acc, 0..n);
        return acc;
    }
    let mut partials = map_range(blocks, |b| {
        let mut acc = init();
        fold(&mut acc, b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(n));
        acc
    })
    .into_iter();
    let mut acc = partials.next().expect("at least one block");
    for part in partials {
        merge(&mut acc, part);
    }
    acc
}

/// Runs `f` with at most `threads` worker threads (0 = library default).
/// Without the `parallel` feature this simply calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                return pool.install(f);
            }
        }
    }
    let _ = threads;
    f()
}

/// Whether this build was compiled with rayon support.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
