//! Order-independent parallel reductions.
//!
//! Sums are split into fixed-size chunks whose partial results are merged in
//! chunk order, so floating-point results do not depend on the thread count.

use rayon::prelude::*;

pub(crate) const CHUNK: usize = 4096;

/// Folds `0..n` in fixed chunks (in parallel) and merges the chunk results
/// sequentially from left to right.
pub(crate) fn fold_chunks<A, I, F, M>(n: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, usize) + Sync,
    M: Fn(&mut A, A),
{
    let run = |c: usize| {
        let mut acc = init();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            fold(&mut acc, i);
        }
        acc
    };
    let n_chunks = n.div_ceil(CHUNK);
    if n_chunks <= 1 {
        return run(0);
    }
    let parts: Vec<A> = (0..n_chunks).into_par_iter().map(run).collect();
    let mut it = parts.into_iter();
    let mut total = it.next().expect("at least one chunk");
    for p in it {
        merge(&mut total, p);
    }
    total
}

/// Deterministic parallel sum of `f(i)` over `0..n`.
pub(crate) fn sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    fold_chunks(n, || 0.0, |acc, i| *acc += f(i), |a, b| *a += b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_sum_is_thread_count_independent() {
        let n = 3 * CHUNK + 17;
        let f = |i: usize| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (1.0 + i as f64);
        let reference = sum(n, f);
        for threads in [1, 2, 5] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let s = pool.install(|| sum(n, f));
            assert_eq!(s.to_bits(), reference.to_bits());
        }
    }
}
