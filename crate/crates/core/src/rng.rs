//! Seeded random streams and a worker-count independent chunked reducer.
//!
//! Every unit of stochastic work is identified by `(master seed, chunk index)`.
//! A chunk always draws from its own ChaCha stream, and chunk results are merged
//! in index order, so the output does not depend on how rayon schedules chunks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

/// Independent stream `index` of the family rooted at `master`.
pub fn stream(master: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Seed of a child family, used when one experiment spawns several sub-runs.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `work(stream, chunk_index, chunk_len)` over `total` items split into
/// fixed-size chunks and returns the per-chunk results in chunk order.
pub fn chunked<T, F>(total: usize, chunk_size: usize, master: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, usize, usize) -> T + Sync,
{
    let chunk_size = chunk_size.max(1);
    let n_chunks = total.div_ceil(chunk_size);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = chunk_size.min(total - c * chunk_size);
            let mut rng = stream(master, c as u64);
            work(&mut rng, c, len)
        })
        .collect()
}

/// Running sum and sum of squares; merged in a fixed order it is reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Pairwise (cascade) summation, fixed order for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: f64 = stream(7, 0).gen();
        let b: f64 = stream(7, 0).gen();
        let c: f64 = stream(7, 1).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn chunked_is_independent_of_thread_count() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                chunked(1000, 64, 3, |rng, _, len| {
                    (0..len).map(|_| rng.gen::<f64>()).sum::<f64>()
                })
            })
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn accumulator_matches_direct() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let mut acc = MeanAccumulator::default();
        xs.iter().for_each(|&x| acc.push(x));
        assert_eq!(acc.mean(), 3.75);
        let var = xs.iter().map(|x| (x - 3.75f64).powi(2)).sum::<f64>() / 3.0;
        assert!((acc.variance() - var).abs() < 1e-12);
    }
}
