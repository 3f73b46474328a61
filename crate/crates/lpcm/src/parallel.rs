//! Sequential/parallel dispatch for the data-parallel inner loops.
//!
//! With the `parallel` feature (default) the loops below fan out over rayon;
//! without it they degrade to plain sequential iteration. Every parallel
//! site writes independent output slots and keeps any reduction inside one
//! task sequential, so results are bit-identical across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each contiguous chunk of `data` (chunk index, chunk).
pub(crate) fn for_each_chunk_mut<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

pub(crate) fn for_each_chunk_mut_seq<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    data.chunks_mut(chunk).enumerate().for_each(|(k, c)| f(k, c));
}

/// Fill `out[k] = f(k)` for independent slots.
pub(crate) fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut().enumerate().for_each(|(k, slot)| *slot = f(k));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(k, slot)| *slot = f(k));
}

