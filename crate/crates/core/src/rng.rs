//! Counter-based random streams for partitioned Monte Carlo.
//!
//! The sample index space is cut into fixed-size blocks; block `b` draws from
//! ChaCha8 keyed by the run seed with stream id `b`. Per-block partial sums are
//! reduced in block order, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BLOCK: usize = 1 << 16;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Runs `body(rng, count)` over blocks covering `n` samples in parallel and
/// folds the per-block results in block order with `merge`.
pub fn par_blocks<T, B, M>(n: usize, seed: u64, body: B, merge: M) -> Option<T>
where
    T: Send,
    B: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
    M: Fn(T, T) -> T,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<T> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK.min(n - b * BLOCK);
            let mut rng = stream(seed, b as u64);
            body(&mut rng, count)
        })
        .collect();
    parts.into_iter().reduce(merge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn independent_of_thread_count() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                par_blocks(
                    300_000,
                    11,
                    |rng, c| (0..c).map(|_| rng.random::<f64>()).sum::<f64>(),
                    |a, b| a + b,
                )
                .unwrap()
            })
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }
}
