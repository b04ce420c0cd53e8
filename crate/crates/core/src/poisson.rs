//! Lattice probability weights (Poisson, binomial, negative binomial)
//! computed by multiplicative recurrence outward from the mode.
//!
//! Terms are generated relative to an unnormalized mode weight of 1 and the
//! whole table is normalized by its sum at the end, so no factorials or
//! log-gamma values enter and the weights sum to one up to roundoff. The
//! recurrence stops once the remaining tail is below `REL_TINY` relative to
//! the mode, a mass that is carried as a bound in every tail figure.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Bound on the unrepresented tail mass, relative to the mode weight.
const REL_TINY: f64 = 1e-35;

#[derive(Debug, Clone)]
pub(crate) struct LatticeLaw {
    start: usize,
    weights: Vec<f64>,
    /// Upper bound on the mass outside `start..start + weights.len()`.
    unrepresented: f64,
}

/// Portion of a law kept for summation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window<'a> {
    pub lo: usize,
    pub weights: &'a [f64],
    pub omitted: f64,
}

impl<'a> Window<'a> {
    pub fn hi(&self) -> usize {
        self.lo + self.weights.len() - 1
    }
}

impl LatticeLaw {
    pub fn point_mass(at: usize) -> Self {
        Self { start: at, weights: alloc::vec![1.0], unrepresented: 0.0 }
    }

    /// Poisson(λ).
    pub fn poisson(lambda: f64, max_terms: usize) -> Result<Self> {
        if lambda == 0.0 {
            return Ok(Self::point_mass(0));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Evaluation { x: lambda });
        }
        let mode = lambda.floor();
        if mode >= max_terms as f64 {
            return Err(Error::TruncationFailure { required: mode as usize, max_terms });
        }
        from_mode(
            mode as usize,
            None,
            max_terms,
            |k| lambda / (k as f64 + 1.0),
            |k| k as f64 / lambda,
        )
    }

    /// Binomial(n, p), all `n + 1` atoms.
    pub fn binomial(n: usize, p: f64) -> Self {
        if p <= 0.0 {
            return Self::point_mass(0);
        }
        if p >= 1.0 {
            return Self::point_mass(n);
        }
        let odds = p / (1.0 - p);
        let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
        let nf = n as f64;
        let mut law = from_mode(
            mode,
            Some(n),
            usize::MAX,
            |k| (nf - k as f64) / (k as f64 + 1.0) * odds,
            |k| k as f64 / ((nf - k as f64 + 1.0) * odds),
        )
        .expect("binomial recurrence is finite");
        law.unrepresented = 0.0;
        law
    }

    /// Negative binomial with weights `C(n+k-1, k) x^k / (1+x)^{n+k}`.
    pub fn negative_binomial(n: usize, x: f64, max_terms: usize) -> Result<Self> {
        if x == 0.0 {
            return Ok(Self::point_mass(0));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::Evaluation { x });
        }
        let q = x / (1.0 + x);
        let nf = n as f64;
        let mode = ((nf - 1.0) * x).max(0.0).floor();
        if mode >= max_terms as f64 {
            return Err(Error::TruncationFailure { required: mode as usize, max_terms });
        }
        from_mode(
            mode as usize,
            None,
            max_terms,
            |k| (nf + k as f64) / (k as f64 + 1.0) * q,
            |k| k as f64 / ((nf + k as f64 - 1.0) * q),
        )
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn end(&self) -> usize {
        self.start + self.weights.len() - 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mass strictly above `k`.
    pub fn mass_above(&self, k: usize) -> f64 {
        if k >= self.end() {
            return self.unrepresented;
        }
        let first = k.saturating_add(1).max(self.start) - self.start;
        self.weights[first..].iter().rev().sum::<f64>() + self.unrepresented
    }

    /// Mass strictly below `k`.
    #[cfg(test)]
    pub fn mass_below(&self, k: usize) -> f64 {
        if k <= self.start {
            return self.unrepresented;
        }
        let last = (k - self.start).min(self.weights.len());
        self.weights[..last].iter().sum::<f64>() + self.unrepresented
    }

    /// Smallest `K` whose upper tail (mass above `K`) is at most `eps`,
    /// together with that tail.
    pub fn upper_cut(&self, eps: f64) -> (usize, f64) {
        let mut tail = self.unrepresented;
        let mut k = self.end();
        for (idx, &w) in self.weights.iter().enumerate().rev() {
            if tail + w > eps {
                return (self.start + idx, tail);
            }
            tail += w;
            k = self.start + idx;
        }
        // Every atom lies in the tolerance: the whole law can be dropped,
        // but K is never below the support start minus one.
        (k.saturating_sub(1), tail)
    }

    /// Largest `lo` whose lower tail (mass below `lo`) is at most `eps`,
    /// together with that tail.
    pub fn lower_cut(&self, eps: f64) -> (usize, f64) {
        let mut tail = 0.0;
        for (idx, &w) in self.weights.iter().enumerate() {
            if tail + w > eps {
                return (self.start + idx, tail);
            }
            tail += w;
        }
        (self.end(), tail - self.weights[self.weights.len() - 1])
    }

    /// Window dropping at most `eps_lower` below and `eps_upper` above. The
    /// window additionally never extends above `cap` (if given); the mass
    /// above `cap` is then added to `omitted`.
    pub fn window(&self, eps_lower: f64, eps_upper: f64, cap: Option<usize>) -> Window<'_> {
        let (lo, lower) = self.lower_cut(eps_lower);
        let (mut hi, mut upper) = self.upper_cut(eps_upper);
        if let Some(c) = cap {
            if hi > c {
                hi = c;
                upper = self.mass_above(c);
            }
        }
        let hi = hi.max(lo);
        let weights = &self.weights[lo - self.start..=hi - self.start];
        Window { lo, weights, omitted: lower + upper }
    }
}

fn from_mode<U, D>(
    mode: usize,
    upper_bound: Option<usize>,
    max_terms: usize,
    up: U,
    down: D,
) -> Result<LatticeLaw>
where
    U: Fn(usize) -> f64,
    D: Fn(usize) -> f64,
{
    let mut above = Vec::new();
    let mut k = mode;
    let mut term = 1.0f64;
    loop {
        if upper_bound.is_some_and(|b| k >= b) {
            break;
        }
        let r = up(k);
        let next = term * r;
        if !next.is_finite() {
            return Err(Error::Evaluation { x: k as f64 });
        }
        if r < 1.0 && upper_bound.is_none() && next / (1.0 - r) < REL_TINY {
            break;
        }
        if next == 0.0 {
            break;
        }
        term = next;
        k += 1;
        above.push(term);
        if k >= max_terms {
            return Err(Error::TruncationFailure { required: k + 1, max_terms });
        }
    }
    let mut below = Vec::new();
    let mut k = mode;
    let mut term = 1.0f64;
    while k > 0 {
        let r = down(k);
        let next = term * r;
        if !next.is_finite() {
            return Err(Error::Evaluation { x: k as f64 });
        }
        if r < 1.0 && upper_bound.is_none() && next / (1.0 - r) < REL_TINY {
            break;
        }
        if next == 0.0 {
            break;
        }
        term = next;
        k -= 1;
        below.push(term);
    }
    let start = mode - below.len();
    let mut weights = Vec::with_capacity(below.len() + 1 + above.len());
    weights.extend(below.iter().rev());
    weights.push(1.0);
    weights.extend(above.iter());
    let total: f64 = sorted_sum(&weights);
    for w in &mut weights {
        *w /= total;
    }
    Ok(LatticeLaw { start, weights, unrepresented: 2.0 * REL_TINY / total })
}

/// Sums nonnegative terms from smallest to largest.
fn sorted_sum(w: &[f64]) -> f64 {
    let mut v: Vec<f64> = w.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v.iter().sum()
}

/// Smallest `K ≥ λ` such that the Chernoff bound
/// `P(X > K) ≤ e^{-λ} (eλ/(K+1))^{K+1}` is at most `eps`. Always an upper
/// bound on the exact truncation index.
pub(crate) fn chernoff_index(lambda: f64, eps: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let log_eps = eps.ln();
    let log_bound = |m: f64| -lambda + m * (1.0 + lambda.ln() - m.ln());
    let mut lo = lambda.floor();
    if log_bound(lo + 1.0) <= log_eps {
        return lo;
    }
    let mut hi = (lambda * 2.0).max(lambda + 10.0).ceil();
    while log_bound(hi + 1.0) > log_eps {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if log_bound(mid + 1.0) <= log_eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
