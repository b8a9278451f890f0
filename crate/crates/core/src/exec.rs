//! Order-preserving map over slices, parallel when the `parallel` feature is on.
//!
//! Every caller must pass a pure closure; the output vector is always in input
//! order, so results are identical with and without rayon. `map_seq` (and
//! `map_par` when compiled in) stay public so benchmarks can compare the two
//! paths directly.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving order. Dispatches to rayon when the
/// `parallel` feature is enabled, otherwise runs sequentially.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

/// Sequential reference path.
pub fn map_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Rayon path; compiled only with the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn map_par<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        let out = map(&items, |x| x * 2);
        let expected = map_seq(&items, |x| x * 2);
        assert_eq!(out, expected);
    }
}
