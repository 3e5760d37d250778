//! Batch helpers shared by the training stages.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per work unit. Chunks are reduced in index order, so results do
/// not depend on the number of worker threads.
pub(crate) const CHUNK: usize = 8;

/// Maps every item to a gradient contribution and sums them in a fixed order:
/// sequentially within each chunk of [`CHUNK`] items, then across chunks.
pub(crate) fn reduce_fixed_order<T, G, Z, F, A>(items: &[T], zero: Z, per_item: F, add: A) -> G
where
    T: Sync,
    G: Send,
    Z: Fn() -> G + Sync,
    F: Fn(&T, &mut G) + Sync,
    A: Fn(&mut G, &G),
{
    let partials: Vec<G> = items
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            for item in chunk {
                per_item(item, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = zero();
    for p in &partials {
        add(&mut total, p);
    }
    total
}

pub(crate) fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Derives an independent stream seed from a run seed and a stage tag.
pub(crate) fn sub_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
