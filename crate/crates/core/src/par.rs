//! Index-parallel maps and order-stable reductions.
//!
//! With the `parallel` feature the maps run on the rayon pool; without it they
//! run sequentially. Every reduction is a fixed-shape pairwise tree over the
//! collected values, so results do not depend on the thread count.

use std::ops::Add;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
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

/// Pairwise (cascade) sum of a slice. Returns `None` for an empty slice.
pub fn pairwise_sum<T>(items: &[T]) -> Option<T>
where
    T: Clone,
    for<'a> &'a T: Add<&'a T, Output = T>,
{
    match items.len() {
        0 => None,
        1 => Some(items[0].clone()),
        2 => Some(&items[0] + &items[1]),
        n => {
            let (lo, hi) = items.split_at(n / 2);
            let a = pairwise_sum(lo)?;
            let b = pairwise_sum(hi)?;
            Some(&a + &b)
        }
    }
}

pub fn pairwise_sum_f64(items: &[f64]) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0],
        n if n <= 8 => items.iter().sum(),
        n => {
            let (lo, hi) = items.split_at(n / 2);
            pairwise_sum_f64(lo) + pairwise_sum_f64(hi)
        }
    }
}

/// Streaming pairwise summation with O(log n) memory.
///
/// Values are merged like a binary counter: two partial sums are combined only
/// when they cover the same number of inputs. The merge order depends on the
/// push count alone.
#[derive(Debug, Clone)]
pub struct Cascade<T> {
    stack: Vec<(u32, T)>,
}

impl<T> Default for Cascade<T> {
    fn default() -> Self {
        Self { stack: Vec::new() }
    }
}

impl<T> Cascade<T>
where
    for<'a> &'a T: Add<&'a T, Output = T>,
{
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, value: T) {
        let mut level = 0u32;
        let mut value = value;
        while let Some((top_level, _)) = self.stack.last() {
            if *top_level != level {
                break;
            }
            let (_, top) = self.stack.pop().expect("non-empty");
            value = &top + &value;
            level += 1;
        }
        self.stack.push((level, value));
    }

    pub fn finish(mut self) -> Option<T> {
        let (_, mut acc) = self.stack.pop()?;
        while let Some((_, below)) = self.stack.pop() {
            acc = &below + &acc;
        }
        Some(acc)
    }
}

/// Splits `0..n` into fixed-size chunks, maps each chunk in parallel and
/// combines the chunk results pairwise.
pub fn chunked_sum<T, E, F>(n: usize, chunk: usize, f: F) -> Result<Option<T>, E>
where
    T: Send + Clone,
    E: Send,
    for<'a> &'a T: Add<&'a T, Output = T>,
    F: Fn(std::ops::Range<usize>) -> Result<Option<T>, E> + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let parts = try_map_indexed(n_chunks, |c| {
        let start = c * chunk;
        f(start..(start + chunk).min(n))
    })?;
    let parts: Vec<T> = parts.into_iter().flatten().collect();
    Ok(pairwise_sum(&parts))
}
