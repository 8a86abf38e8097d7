//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run sequentially. Every helper returns results
//! in input order so callers can reduce deterministically.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `f` over an owned vector, preserving order.
pub fn map_vec<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Counts into `n_bins` integer bins. `bin_of` returns `None` for items that
/// fall outside every bin. Returns the bins and the number of ignored items.
pub fn bin_counts<T, F>(items: &[T], n_bins: usize, bin_of: F) -> (Vec<u64>, u64)
where
    T: Sync,
    F: Fn(&T) -> Option<usize> + Sync + Send,
{
    let fold = |mut acc: (Vec<u64>, u64), item: &T| {
        match bin_of(item) {
            Some(b) => acc.0[b] += 1,
            None => acc.1 += 1,
        }
        acc
    };
    #[cfg(feature = "parallel")]
    {
        items
            .par_iter()
            .fold(|| (vec![0u64; n_bins], 0u64), fold)
            .reduce(
                || (vec![0u64; n_bins], 0u64),
                |mut a, b| {
                    a.0.iter_mut().zip(&b.0).for_each(|(x, y)| *x += y);
                    a.1 += b.1;
                    a
                },
            )
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().fold((vec![0u64; n_bins], 0u64), fold)
    }
}

/// Number of worker threads the helpers will use.
pub fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_keeps_order() {
        let v = map_range(100, |i| i * 2);
        assert_eq!(v, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }

    #[test]
    fn bin_counts_conserves() {
        let items: Vec<i32> = (-5..20).collect();
        let (bins, ignored) = bin_counts(&items, 10, |&x| {
            if (0..10).contains(&x) {
                Some(x as usize)
            } else {
                None
            }
        });
        assert_eq!(bins, vec![1; 10]);
        assert_eq!(ignored, 15);
    }
}
