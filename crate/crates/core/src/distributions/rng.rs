use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Draws are generated in fixed-size chunks, each from its own substream, so
/// results do not depend on how chunks are scheduled across threads.
pub const CHUNK: usize = 4096;

/// A reproducible source of random numbers identified by `(seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// An independent stream derived from this one and `tag`.
    pub fn child(&self, tag: u64) -> RandomStream {
        RandomStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }
}

/// Running sums for a Monte Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAcc {
    pub n: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.sum / self.n as f64
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let m = self.sum / n;
        let var = ((self.sum_sq - n * m * m) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Splits `n` draws into chunks of [`CHUNK`], runs `f(rng, chunk_len)` for
/// each chunk in parallel, and returns the results in chunk order.
pub fn chunked<T, F>(stream: RandomStream, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha20Rng, usize) -> T + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n - c * CHUNK);
            let mut rng = stream.child(c as u64).rng();
            f(&mut rng, len)
        })
        .collect()
}

/// Monte Carlo mean of `f(rng)` over `n` draws, merged in chunk order.
pub fn mc_mean<F>(stream: RandomStream, n: usize, f: F) -> MeanAcc
where
    F: Fn(&mut ChaCha20Rng) -> f64 + Sync,
{
    let parts = chunked(stream, n, |rng, len| {
        let mut acc = MeanAcc::default();
        for _ in 0..len {
            acc.push(f(rng));
        }
        acc
    });
    let mut acc = MeanAcc::default();
    for p in &parts {
        acc.merge(p);
    }
    acc
}
