//! Deterministic parallel reduction helpers.
//!
//! All parallel loops in this crate go through fixed-size chunking with
//! results merged in chunk order, so a run produces bit-identical numbers
//! regardless of the worker count. The pool size is capped by the
//! `CURVOPT_THREADS` environment variable (read once).

use std::sync::Once;

static INIT: Once = Once::new();

/// Initialize the global rayon pool, honoring `CURVOPT_THREADS`.
/// Safe to call repeatedly; only the first call has an effect.
pub fn init_pool() {
    INIT.call_once(|| {
        if let Ok(s) = std::env::var("CURVOPT_THREADS") {
            if let Ok(n) = s.trim().parse::<usize>() {
                if n >= 1 {
                    // Ignore failure: the pool may already exist in tests.
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(n)
                        .build_global();
                }
            }
        }
    });
}

/// Chunk size used for point-parallel loops. Small enough to balance two
/// workers on a few hundred points, large enough to amortize dispatch.
pub const CHUNK: usize = 32;

/// Map `f` over fixed chunks of `0..n` in parallel and merge the chunk
/// results sequentially in chunk order with `merge`.
pub fn chunked_map_reduce<T, F, M>(n: usize, f: F, init: T, mut merge: M) -> T
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync + Send,
    M: FnMut(T, T) -> T,
{
    init_pool();
    use rayon::prelude::*;
    let ranges: Vec<std::ops::Range<usize>> = (0..n)
        .step_by(CHUNK)
        .map(|s| s..(s + CHUNK).min(n))
        .collect();
    let parts: Vec<T> = ranges.into_par_iter().map(f).collect();
    let mut acc = init;
    for p in parts {
        acc = merge(acc, p);
    }
    acc
}

/// Add `src` into `dst` elementwise.
pub fn add_assign(dst: &mut [f64], src: &[f64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
