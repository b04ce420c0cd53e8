//! Iterates of the operators on the lattice `{i/n}`.
//!
//! `P_n^k f(i/n)` equals `E[f(H_n^k(i/n))]` for the Markov chain whose one-step
//! law from `i/n` is Poisson(i)/n (Bernstein: Binomial(n, i/n)/n). The exact
//! route iterates a truncated transition kernel; the stochastic route samples
//! the chain. Kernel rows are never renormalized: the mass a row drops is its
//! defect, and the probability that the chain has left the represented
//! window is propagated alongside the values as an explicit error budget.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Error, Result};
use crate::funcspace::TestFunction;
use crate::montecarlo::{self, MonteCarloEstimate, StreamRng};
use crate::operators::{truncation_index, TruncationPolicy};
use crate::poisson::LatticeLaw;

/// Which chain a kernel describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    SzaszMirakyan,
    Bernstein,
}

#[derive(Debug, Clone)]
struct KernelRow {
    start: usize,
    probs: Vec<f64>,
    defect: f64,
}

/// One-step transition probabilities on states `0..=cutoff`.
///
/// Rows `0..=trusted` are guaranteed to drop at most `tail_eps` of mass.
/// Rows above `trusted` are kept so that iterates are defined on the whole
/// window, but may lose more; that loss shows up in the escape budget.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    family: KernelFamily,
    n: u32,
    cutoff: usize,
    trusted: usize,
    tail_eps: f64,
    rows: Vec<KernelRow>,
}

impl TransitionKernel {
    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn trusted(&self) -> usize {
        self.trusted
    }

    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    /// `p(i, j)`; zero outside the stored band.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        let row = &self.rows[i];
        if j < row.start {
            return 0.0;
        }
        row.probs.get(j - row.start).copied().unwrap_or(0.0)
    }

    /// Row `i` as a dense vector over `0..=cutoff`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..=self.cutoff).map(|j| self.prob(i, j)).collect()
    }

    pub fn defect(&self, i: usize) -> f64 {
        self.rows[i].defect
    }

    /// Largest defect over the trusted rows.
    pub fn max_trusted_defect(&self) -> f64 {
        self.rows[..=self.trusted].iter().map(|r| r.defect).fold(0.0, f64::max)
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                row.probs
                    .iter()
                    .zip(&v[row.start..row.start + row.probs.len()])
                    .map(|(p, x)| p * x)
                    .sum()
            })
            .collect()
    }

    fn apply_escape(&self, e: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                row.defect
                    + row
                        .probs
                        .iter()
                        .zip(&e[row.start..row.start + row.probs.len()])
                        .map(|(p, x)| p * x)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Extends a lattice iterate `P^k f` to an arbitrary starting point: one
    /// more application of the operator from `x`, i.e. `P^{k+1} f(x)`.
    pub fn step_from(&self, lattice: &LatticeFunction, x: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0) {
            return Err(invalid("starting point must be nonnegative"));
        }
        let law = match self.family {
            KernelFamily::SzaszMirakyan => LatticeLaw::poisson(self.n as f64 * x, usize::MAX / 4)?,
            KernelFamily::Bernstein => {
                if x > 1.0 {
                    return Err(invalid("Bernstein chain lives on [0, 1]"));
                }
                LatticeLaw::binomial(self.n as usize, x)
            }
        };
        let half = self.tail_eps / 2.0;
        let window = law.window(half, half, Some(self.cutoff));
        if window.hi() > self.cutoff {
            return Err(Error::CutoffTooSmall { row: window.lo, defect: 1.0, tail_eps: self.tail_eps });
        }
        let mut value = 0.0;
        let mut escape = window.omitted;
        for (j, &p) in window.weights.iter().enumerate() {
            value += p * lattice.values[window.lo + j];
            escape += p * lattice.escape[window.lo + j];
        }
        Ok((value, escape * lattice.sup_f))
    }
}

/// Truncated Szász–Mirakyan kernel `p(i, j) = e^{-i} i^j / j!` on states
/// `0..=cutoff`. Errors if a row up to `trusted` loses more than `tail_eps`.
pub fn build_sm_kernel(n: u32, cutoff: usize, trusted: usize, tail_eps: f64) -> Result<TransitionKernel> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if trusted > cutoff {
        return Err(invalid("trusted rows must lie inside the cutoff"));
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(invalid("tail_eps must lie in (0, 1)"));
    }
    let half = tail_eps / 2.0;
    let mut rows = Vec::with_capacity(cutoff + 1);
    for i in 0..=cutoff {
        let law = LatticeLaw::poisson(i as f64, usize::MAX / 4)?;
        let w = law.window(half, half, Some(cutoff));
        rows.push(KernelRow { start: w.lo, probs: w.weights.to_vec(), defect: w.omitted });
    }
    let (worst, defect) = rows[..=trusted]
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.defect))
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    if defect > tail_eps {
        return Err(Error::CutoffTooSmall { row: worst, defect, tail_eps });
    }
    Ok(TransitionKernel { family: KernelFamily::SzaszMirakyan, n, cutoff, trusted, tail_eps, rows })
}

/// Kernel sized for starting points up to `x_max`: rows are trusted up to
/// `⌈n·x_max·safety⌉` and the cutoff is the Poisson quantile of that mean at
/// level `tail_eps/2`.
pub fn sm_kernel_for_range(n: u32, x_max: f64, tail_eps: f64, safety: f64) -> Result<TransitionKernel> {
    if !(x_max >= 0.0) || !(safety >= 1.0) {
        return Err(invalid("need x_max >= 0 and safety >= 1"));
    }
    let trusted = (n as f64 * x_max * safety).ceil() as usize;
    let policy = TruncationPolicy::new(tail_eps / 2.0, usize::MAX / 8)?;
    let cutoff = truncation_index(1, trusted as f64, &policy)?.max(trusted);
    build_sm_kernel(n, cutoff, trusted, tail_eps)
}

/// Exact `n × n` Wright–Fisher (Bernstein) kernel on states `0..=n`.
pub fn bernstein_kernel(n: u32) -> Result<TransitionKernel> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let size = n as usize;
    let rows = (0..=size)
        .map(|i| {
            let law = LatticeLaw::binomial(size, i as f64 / n as f64);
            KernelRow { start: law.start(), probs: law.weights().to_vec(), defect: 0.0 }
        })
        .collect();
    Ok(TransitionKernel {
        family: KernelFamily::Bernstein,
        n,
        cutoff: size,
        trusted: size,
        tail_eps: f64::MIN_POSITIVE,
        rows,
    })
}

/// `P^k f` restricted to the lattice `{i/n : 0 ≤ i ≤ cutoff}`.
#[derive(Debug, Clone)]
pub struct LatticeFunction {
    n: u32,
    values: Vec<f64>,
    /// Probability that the truncated chain started at `i/n` has lost mass.
    escape: Vec<f64>,
    sup_f: f64,
    trusted: usize,
    steps: usize,
}

impl LatticeFunction {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Escape probability from state `i` times `sup |f|`.
    pub fn budget_at(&self, i: usize) -> f64 {
        self.escape[i] * self.sup_f
    }

    /// Largest per-state budget over the trusted states.
    pub fn error_budget(&self) -> f64 {
        self.escape[..=self.trusted.min(self.escape.len() - 1)]
            .iter()
            .fold(0.0f64, |m, &e| m.max(e))
            * self.sup_f
    }

    /// Largest per-state budget over states `0..=up_to`.
    pub fn error_budget_up_to(&self, up_to: usize) -> f64 {
        self.escape[..=up_to.min(self.escape.len() - 1)]
            .iter()
            .fold(0.0f64, |m, &e| m.max(e))
            * self.sup_f
    }

    /// Index of the lattice point `x`, when `x·n` is an integer inside the window.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let i = (x * self.n as f64).round();
        if i >= 0.0 && (i / self.n as f64 - x).abs() <= 1e-12 * x.max(1.0) && (i as usize) < self.values.len() {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// `v = M^k f|_lattice`, with the escape probabilities iterated alongside.
pub fn kernel_iterate(kernel: &TransitionKernel, f: &TestFunction, k: usize) -> Result<LatticeFunction> {
    let n = kernel.n as f64;
    let mut values = (0..=kernel.cutoff)
        .map(|i| f.try_eval(i as f64 / n))
        .collect::<Result<Vec<f64>>>()?;
    let lattice_sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_f = f.sup_bound().map_or(lattice_sup, |s| s.max(lattice_sup));
    let mut escape = alloc::vec![0.0; values.len()];
    for _ in 0..k {
        values = kernel.apply(&values);
        escape = kernel.apply_escape(&escape);
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation { x: i as f64 / n });
        }
    }
    Ok(LatticeFunction { n: kernel.n, values, escape, sup_f, trusted: kernel.trusted, steps: k })
}

/// A state `i/n` of the Szász–Mirakyan chain after `step` transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainState {
    pub index: u64,
    pub n: u32,
    pub step: u32,
}

impl ChainState {
    pub fn value(&self) -> f64 {
        self.index as f64 / self.n as f64
    }
}

/// One Poisson draw; mean zero is the absorbing state.
pub(crate) fn poisson_draw(mean: f64, rng: &mut StreamRng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("finite positive Poisson mean");
    d.sample(rng) as u64
}

/// `H_n^k(x)`: `k` steps of `y ↦ T_n(y)/n` with `T_n(y) ~ Poisson(ny)`.
pub fn chain_sample_sm(n: u32, k: u32, x: f64, rng: &mut StreamRng) -> Result<ChainState> {
    if n == 0 || k == 0 {
        return Err(invalid("chain sampling needs n >= 1 and k >= 1"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid("starting point must be finite and nonnegative"));
    }
    let mut mean = n as f64 * x;
    let mut index = 0;
    for _ in 0..k {
        index = poisson_draw(mean, rng);
        if index == 0 {
            break;
        }
        // n · (T/n) = T
        mean = index as f64;
    }
    Ok(ChainState { index, n, step: k })
}

/// The replica map `rng ↦ f(H_n^k(x))` used by the Monte Carlo drivers.
pub fn chain_sampler(n: u32, k: u32, x: f64, f: TestFunction) -> Result<impl Fn(&mut StreamRng) -> f64 + Send + Sync> {
    if n == 0 || k == 0 || !(x >= 0.0) {
        return Err(invalid("chain sampling needs n >= 1, k >= 1 and x >= 0"));
    }
    Ok(move |rng: &mut StreamRng| {
        let s = chain_sample_sm(n, k, x, rng).expect("arguments validated");
        f.eval(s.value())
    })
}

/// Monte Carlo estimate of `E[f(H_n^k(x))] = P_n^k f(x)`.
pub fn chain_expectation_mc(
    n: u32,
    k: u32,
    x: f64,
    f: &TestFunction,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    let draw = chain_sampler(n, k, x, f.clone())?;
    Ok(montecarlo::estimate(samples, seed, workers, &draw))
}

/// The Kelisky–Rivlin limit of `B_n^k f` as `k → ∞`: `f(0) + (f(1) - f(0)) x`.
pub fn kelisky_rivlin_reference(f: &TestFunction, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("Kelisky-Rivlin limit is defined on [0, 1]"));
    }
    let (f0, f1) = (f.eval(0.0), f.eval(1.0));
    Ok(f0 + (f1 - f0) * x)
}
