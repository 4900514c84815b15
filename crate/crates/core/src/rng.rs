//! Seeded random streams that give the same numbers for any thread count.
//!
//! Work is cut into fixed-size blocks of sample indices. Block `b` always
//! draws from stream `b` of a ChaCha8 generator keyed by the seed, so the
//! assignment of blocks to threads cannot change the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Samples per stream block.
pub const BLOCK: usize = 4096;

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Run `f(rng, range)` over consecutive blocks of `0..n` in parallel and
/// return the per-block results in block order.
pub fn par_blocks<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, std::ops::Range<usize>) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(seed, b as u64);
            let start = b * BLOCK;
            f(&mut rng, start..(start + BLOCK).min(n))
        })
        .collect()
}

/// `rows × dim` standard normal draws, row-major.
pub fn standard_normals(rows: usize, dim: usize, seed: u64) -> Vec<f64> {
    par_blocks(rows, seed, |rng, range| {
        (0..range.len() * dim)
            .map(|_| StandardNormal.sample(rng))
            .collect::<Vec<f64>>()
    })
    .concat()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let a = standard_normals(3 * BLOCK + 17, 2, 9);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| standard_normals(3 * BLOCK + 17, 2, 9));
        assert_eq!(a, b);
        assert_ne!(a, standard_normals(3 * BLOCK + 17, 2, 10));
    }

    #[test]
    fn blocks_use_distinct_streams() {
        let v = standard_normals(2 * BLOCK, 1, 1);
        assert_ne!(v[..BLOCK], v[BLOCK..]);
    }
}
