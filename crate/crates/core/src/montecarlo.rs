//! Monte Carlo estimates with reproducible, partitioned random streams.
//!
//! A run of `samples` replicas is split across `workers` contiguous chunks.
//! Worker `w` draws from ChaCha8 stream `w` of the master seed, and the
//! per-worker accumulators are merged in worker order. Results therefore
//! depend on `(seed, samples, workers)` only, never on how chunks are
//! scheduled onto threads.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random stream handed to every sampler.
pub type StreamRng = ChaCha8Rng;

/// Sample mean, its standard error and the number of replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(samples)`; zero when fewer than
    /// two samples were drawn.
    pub stderr: f64,
    pub samples: u64,
}

impl MonteCarloEstimate {
    /// An exact value reported in estimate form.
    pub fn exact(value: f64, samples: u64) -> Self {
        Self { mean: value, stderr: 0.0, samples }
    }
}

/// Welford accumulator, mergeable with Chan's update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let (na, nb, n) = (self.count as f64, other.count as f64, total as f64);
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> MonteCarloEstimate {
        let stderr = if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        };
        MonteCarloEstimate { mean: self.mean, stderr, samples: self.count }
    }
}

/// Stream `worker` of the master seed.
pub fn stream(seed: u64, worker: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(worker);
    rng
}

/// Derives a sub-seed from a master seed and a tag (SplitMix64 finalizer).
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Chunk sizes for `samples` replicas over `workers` workers; the first
/// `samples % workers` chunks get one extra replica.
pub fn partition(samples: u64, workers: usize) -> Vec<u64> {
    let workers = workers.max(1) as u64;
    let base = samples / workers;
    let extra = samples % workers;
    (0..workers).map(|w| base + u64::from(w < extra)).collect()
}

/// Accumulates `count` draws of worker `worker`.
pub fn worker_accumulate<F>(seed: u64, worker: u64, count: u64, draw: &F) -> Accumulator
where
    F: Fn(&mut StreamRng) -> f64 + ?Sized,
{
    let mut rng = stream(seed, worker);
    let mut acc = Accumulator::default();
    for _ in 0..count {
        acc.push(draw(&mut rng));
    }
    acc
}

/// Raw draws of worker `worker`.
pub fn worker_samples<F>(seed: u64, worker: u64, count: u64, draw: &F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + ?Sized,
{
    let mut rng = stream(seed, worker);
    (0..count).map(|_| draw(&mut rng)).collect()
}

/// Sequential driver: runs every worker chunk in order on this thread.
pub fn estimate<F>(samples: u64, seed: u64, workers: usize, draw: &F) -> MonteCarloEstimate
where
    F: Fn(&mut StreamRng) -> f64 + ?Sized,
{
    let mut total = Accumulator::default();
    for (w, count) in partition(samples, workers).into_iter().enumerate() {
        total.merge(&worker_accumulate(seed, w as u64, count, draw));
    }
    total.estimate()
}

/// Sequential driver returning the raw draws in worker order.
pub fn collect<F>(samples: u64, seed: u64, workers: usize, draw: &F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + ?Sized,
{
    let mut out = Vec::with_capacity(samples as usize);
    for (w, count) in partition(samples, workers).into_iter().enumerate() {
        out.extend(worker_samples(seed, w as u64, count, draw));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn constant_draws_have_zero_stderr() {
        let e = estimate(1000, 7, 3, &|_: &mut StreamRng| 1.0);
        assert_eq!(e, MonteCarloEstimate { mean: 1.0, stderr: 0.0, samples: 1000 });
    }

    #[test]
    fn partition_covers_samples() {
        assert_eq!(partition(10, 3), alloc::vec![4, 3, 3]);
        assert_eq!(partition(2, 4), alloc::vec![1, 1, 0, 0]);
        assert_eq!(partition(5, 0), alloc::vec![5]);
    }

    #[test]
    fn same_inputs_same_bits() {
        let draw = |r: &mut StreamRng| r.random::<f64>();
        let a = estimate(5000, 99, 4, &draw);
        let b = estimate(5000, 99, 4, &draw);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_ne!(a.mean.to_bits(), estimate(5000, 100, 4, &draw).mean.to_bits());
    }

    #[test]
    fn stderr_scales_like_inverse_root() {
        let draw = |r: &mut StreamRng| r.random::<f64>();
        let a = estimate(40_000, 3, 2, &draw);
        let b = estimate(160_000, 4, 2, &draw);
        let ratio = a.stderr / b.stderr;
        assert!((ratio - 2.0).abs() <= 0.4, "{ratio}");
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..16).map(|t| derive_seed(42, t)).collect();
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    proptest! {
        #[test]
        fn merge_matches_single_pass(xs in proptest::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
            let split = split.min(xs.len());
            let mut whole = Accumulator::default();
            xs.iter().for_each(|&x| whole.push(x));
            let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
            xs[..split].iter().for_each(|&x| a.push(x));
            xs[split..].iter().for_each(|&x| b.push(x));
            a.merge(&b);
            prop_assert_eq!(a.count(), whole.count());
            prop_assert!((a.estimate().mean - whole.estimate().mean).abs() <= 1e-9);
            prop_assert!((a.variance() - whole.variance()).abs() <= 1e-7 * (1.0 + whole.variance()));
        }
    }
}
