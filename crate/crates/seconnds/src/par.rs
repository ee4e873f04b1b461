//! Thin switch between rayon and sequential iteration.
//!
//! Heavy kernels call `for_each_chunk` / `map_collect` so the same code runs
//! data-parallel with the `parallel` feature and single-threaded without it.

#[cfg(feature = "parallel")]
pub fn for_each_mut<T: Send, F: Fn(usize, &mut T) + Sync + Send>(items: &mut [T], f: F) {
    use rayon::prelude::*;
    items
        .par_iter_mut()
        .enumerate()
        .for_each(|(i, item)| f(i, item));
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_mut<T, F: Fn(usize, &mut T)>(items: &mut [T], f: F) {
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

#[cfg(feature = "parallel")]
pub fn map_range<U: Send, F: Fn(usize) -> U + Sync + Send>(n: usize, f: F) -> Vec<U> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F: Fn(usize) -> U>(n: usize, f: F) -> Vec<U> {
    (0..n).map(f).collect()
}
