//! Thread-parallel Monte Carlo drivers.
//!
//! Each worker chunk runs on its own rayon task and the per-worker
//! accumulators are merged in worker order, so the result is identical to
//! the sequential drivers in `szasz_core::montecarlo` for the same
//! `(seed, samples, workers)`.

use rayon::prelude::*;
use szasz_core::montecarlo::{self, Accumulator, MonteCarloEstimate, StreamRng};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "SZASZ_WORKERS";

/// Worker count from `SZASZ_WORKERS`, else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn estimate<F>(samples: u64, seed: u64, workers: usize, draw: &F) -> MonteCarloEstimate
where
    F: Fn(&mut StreamRng) -> f64 + Sync + ?Sized,
{
    let chunks = montecarlo::partition(samples, workers);
    let parts: Vec<Accumulator> = chunks
        .par_iter()
        .enumerate()
        .map(|(w, &count)| montecarlo::worker_accumulate(seed, w as u64, count, draw))
        .collect();
    let mut total = Accumulator::default();
    for p in &parts {
        total.merge(p);
    }
    total.estimate()
}

/// Raw draws in worker order.
pub fn collect<F>(samples: u64, seed: u64, workers: usize, draw: &F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + Sync + ?Sized,
{
    let chunks = montecarlo::partition(samples, workers);
    let parts: Vec<Vec<f64>> = chunks
        .par_iter()
        .enumerate()
        .map(|(w, &count)| montecarlo::worker_samples(seed, w as u64, count, draw))
        .collect();
    parts.concat()
}
