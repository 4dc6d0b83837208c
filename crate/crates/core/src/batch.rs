//! Order-preserving maps over index ranges.
//!
//! With the `parallel` feature (default) the work is spread over the rayon
//! pool; without it the same closures run sequentially. Results are always
//! returned in index order, so reductions over them are bit-stable.

use std::ops::Range;

/// Map `f` over `range`, returning results in index order.
pub fn map_indexed<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_indexed_parallel(range, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_sequential(range, f)
    }
}

pub fn map_indexed_sequential<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    range.map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_indexed_parallel<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}

/// Map `f` over a slice, in order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Configure the global worker pool. A no-op without the `parallel` feature.
/// Calling it twice keeps the first configuration.
pub fn init_threads(threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let out = map_indexed(0..1000, |i| i * i);
        assert!(out.iter().enumerate().all(|(i, &v)| v == (i as u64) * (i as u64)));
        assert_eq!(out, map_indexed_sequential(0..1000, |i| i * i));
    }
}
