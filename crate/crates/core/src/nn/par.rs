//! Order-preserving data-parallel helpers. Without the `parallel` feature they
//! run sequentially; with it, chunks are distributed over the rayon pool but
//! results still come back in chunk order.

use alloc::vec::Vec;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn chunks_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

pub fn chunks_map<T, R, F>(data: &mut [T], chunk: usize, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(usize, &mut [T]) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    return data
        .par_chunks_mut(chunk)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect();
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk)
        .enumerate()
        .map(|(i, c)| f(i, c))
        .collect()
}
