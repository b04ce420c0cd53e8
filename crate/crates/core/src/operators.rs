//! Single applications of the Szász–Mirakyan, Bernstein and Baskakov
//! operators, exact Poisson moments and the tail bounds used to truncate the
//! infinite series.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::funcspace::TestFunction;
use crate::poisson::{chernoff_index, LatticeLaw, Window};

/// Which operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    SzaszMirakyan,
    Bernstein,
    /// Experimental: only heuristic properties are known.
    Baskakov,
}

/// Controls the truncation of infinite lattice sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    tail_eps: f64,
    max_terms: usize,
}

impl TruncationPolicy {
    pub fn new(tail_eps: f64, max_terms: usize) -> Result<Self> {
        if !(tail_eps > 0.0 && tail_eps < 1.0) {
            return Err(invalid("tail_eps must lie in (0, 1)"));
        }
        if max_terms == 0 {
            return Err(invalid("max_terms must be positive"));
        }
        Ok(Self { tail_eps, max_terms })
    }

    pub fn tail_eps(&self) -> f64 {
        self.tail_eps
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { tail_eps: 1e-12, max_terms: 1_000_000 }
    }
}

/// A truncated operator value plus the probability mass left out of the sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub omitted_mass: f64,
}

/// An operator family together with its index `n ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorInstance {
    kind: OperatorKind,
    n: u32,
}

impl OperatorInstance {
    pub fn new(kind: OperatorKind, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("operator index n must be at least 1"));
        }
        Ok(Self { kind, n })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn apply(&self, f: &TestFunction, x: f64, policy: &TruncationPolicy) -> Result<Evaluation> {
        match self.kind {
            OperatorKind::SzaszMirakyan => sm_apply(self.n, f, x, policy),
            OperatorKind::Bernstein => {
                bernstein_apply(self.n, f, x).map(|value| Evaluation { value, omitted_mass: 0.0 })
            }
            OperatorKind::Baskakov => baskakov_apply(self.n, f, x, policy),
        }
    }
}

fn check_n(n: u32) -> Result<()> {
    if n == 0 {
        Err(invalid("operator index n must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid("x must be a finite nonnegative real"))
    }
}

/// `Σ_k w_k f(k/n)` over a window.
pub(crate) fn lattice_sum(n: u32, f: &TestFunction, window: &Window<'_>) -> Result<f64> {
    let nf = n as f64;
    let mut acc = 0.0;
    for (j, &w) in window.weights.iter().enumerate() {
        let y = (window.lo + j) as f64 / nf;
        let term = w * f.eval(y);
        if !term.is_finite() {
            return Err(Error::Evaluation { x: y });
        }
        acc += term;
    }
    Ok(acc)
}

/// Poisson(nx) law. The table itself may run past `max_terms`; only the part
/// kept for summation is held to the cap.
fn sm_law(n: u32, x: f64, policy: &TruncationPolicy) -> Result<LatticeLaw> {
    check_n(n)?;
    check_x(x)?;
    LatticeLaw::poisson(n as f64 * x, scan_cap(policy))
}

fn scan_cap(policy: &TruncationPolicy) -> usize {
    policy.max_terms.saturating_mul(2).saturating_add(64)
}

/// Szász–Mirakyan operator `P_n f(x) = Σ_k e^{-nx}(nx)^k/k! · f(k/n)`.
pub fn sm_apply(n: u32, f: &TestFunction, x: f64, policy: &TruncationPolicy) -> Result<Evaluation> {
    let law = sm_law(n, x, policy)?;
    let half = policy.tail_eps / 2.0;
    let window = law.window(half, half, None);
    check_terms(window.hi(), policy)?;
    let value = lattice_sum(n, f, &window)?;
    Ok(Evaluation { value, omitted_mass: window.omitted })
}

fn check_terms(k: usize, policy: &TruncationPolicy) -> Result<()> {
    if k > policy.max_terms {
        Err(Error::TruncationFailure { required: k, max_terms: policy.max_terms })
    } else {
        Ok(())
    }
}

/// Bernstein operator `B_n f(x) = Σ_{k=0}^n C(n,k) x^k (1-x)^{n-k} f(k/n)`.
pub fn bernstein_apply(n: u32, f: &TestFunction, x: f64) -> Result<f64> {
    check_n(n)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("Bernstein operator needs x in [0, 1]"));
    }
    let law = LatticeLaw::binomial(n as usize, x);
    let window = Window { lo: law.start(), weights: law.weights(), omitted: 0.0 };
    lattice_sum(n, f, &window)
}

/// Baskakov operator `V_n f(x) = Σ_k C(n+k-1,k) x^k/(1+x)^{n+k} f(k/n)`.
pub fn baskakov_apply(n: u32, f: &TestFunction, x: f64, policy: &TruncationPolicy) -> Result<Evaluation> {
    check_n(n)?;
    check_x(x)?;
    let law = LatticeLaw::negative_binomial(n as usize, x, scan_cap(policy))?;
    let half = policy.tail_eps / 2.0;
    let window = law.window(half, half, None);
    check_terms(window.hi(), policy)?;
    let value = lattice_sum(n, f, &window)?;
    Ok(Evaluation { value, omitted_mass: window.omitted })
}

/// `P_n e^{-λ·}(x) = exp{-nx(1 - e^{-λ/n})}`.
pub fn sm_exponential_closed_form(n: u32, lambda: f64, x: f64) -> Result<f64> {
    check_n(n)?;
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    check_x(x)?;
    let nf = n as f64;
    Ok((-nf * x * (-(-lambda / nf).exp_m1())).exp())
}

/// Raw moment `E[T^p]` of `T ~ Poisson(nx)`, `p ∈ {1,2,3,4}`.
pub fn sm_moment(n: u32, p: u32, x: f64) -> Result<f64> {
    check_n(n)?;
    check_x(x)?;
    let m = n as f64 * x;
    match p {
        1 => Ok(m),
        2 => Ok(m * m + m),
        3 => Ok(m * m * m + 3.0 * m * m + m),
        4 => Ok(m.powi(4) + 6.0 * m.powi(3) + 7.0 * m * m + m),
        _ => Err(invalid("moment order must be 1, 2, 3 or 4")),
    }
}

/// `E[(T/n - x)^4] = 3x²/n² + x/n³` for `T ~ Poisson(nx)`.
pub fn sm_centered_fourth_moment_bound(n: u32, x: f64) -> f64 {
    let nf = n as f64;
    3.0 * x * x / (nf * nf) + x / (nf * nf * nf)
}

/// Square root of [`sm_centered_fourth_moment_bound`].
pub fn sm_centered_fourth_moment_root(n: u32, x: f64) -> f64 {
    sm_centered_fourth_moment_bound(n, x).sqrt()
}

/// `2 exp(-nδ²/(2(x+δ)))`, a bound on `P(|T/n - x| ≥ δ)`. May exceed 1.
pub fn poisson_tail_bound(n: u32, x: f64, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    2.0 * (-(n as f64) * delta * delta / (2.0 * (x + delta))).exp()
}

/// Smallest `K` with `P(Poisson(nx) > K) ≤ tail_eps`.
pub fn truncation_index(n: u32, x: f64, policy: &TruncationPolicy) -> Result<usize> {
    check_n(n)?;
    check_x(x)?;
    let lambda = n as f64 * x;
    if lambda == 0.0 {
        return Ok(0);
    }
    // The Chernoff bound dominates the exact index, so a cap it already
    // fits under cannot fail.
    let fast = chernoff_index(lambda, policy.tail_eps);
    if fast > policy.max_terms as f64 && lambda.floor() > policy.max_terms as f64 {
        return Err(Error::TruncationFailure { required: lambda as usize, max_terms: policy.max_terms });
    }
    let law = LatticeLaw::poisson(lambda, scan_cap(policy).max(fast as usize + 64))?;
    let (k, _) = law.upper_cut(policy.tail_eps);
    check_terms(k, policy)?;
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::catalog;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pol() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(0.0, 10).is_err());
        assert!(TruncationPolicy::new(1.0, 10).is_err());
        assert!(TruncationPolicy::new(1e-6, 0).is_err());
        assert!(OperatorInstance::new(OperatorKind::Bernstein, 0).is_err());
    }

    #[test]
    fn sm_examples() {
        for (n, x) in [(1, 0.0), (3, 0.7), (50, 12.0)] {
            let one = sm_apply(n, &catalog::one(), x, &pol()).unwrap();
            assert!((one.value - 1.0).abs() <= 1e-12);
            assert!(one.omitted_mass <= 1e-12);
            let id = sm_apply(n, &catalog::identity(), x, &pol()).unwrap();
            assert_abs_diff_eq!(id.value, x, epsilon = 1e-10 * (1.0 + x));
        }
        let v = sm_apply(10, &catalog::exp_decay(1.0), 2.0, &pol()).unwrap().value;
        let expect = (-20.0 * (1.0 - (-0.1f64).exp())).exp();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.1490831, epsilon = 5e-8);
    }

    #[test]
    fn bernstein_examples() {
        assert_abs_diff_eq!(bernstein_apply(2, &catalog::square(), 0.5).unwrap(), 0.375, epsilon = 1e-15);
        for n in [1, 4, 17] {
            for x in [0.0, 0.2, 0.5, 1.0] {
                assert_abs_diff_eq!(bernstein_apply(n, &catalog::identity(), x).unwrap(), x, epsilon = 1e-15);
                assert_abs_diff_eq!(bernstein_apply(n, &catalog::constant(3.5), x).unwrap(), 3.5, epsilon = 1e-14);
            }
        }
        assert!(bernstein_apply(3, &catalog::one(), 1.5).is_err());
    }

    #[test]
    fn baskakov_examples() {
        let v = baskakov_apply(1, &catalog::identity(), 1.0, &pol()).unwrap();
        // Σ k 2^{-(1+k)} summed directly.
        let brute: f64 = (0..200).map(|k| k as f64 * 0.5f64.powi(1 + k)).sum();
        assert_abs_diff_eq!(brute, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.value, brute, epsilon = 1e-10);
        for (n, x) in [(1, 0.3), (5, 2.0), (40, 7.5)] {
            let one = baskakov_apply(n, &catalog::one(), x, &pol()).unwrap();
            assert!((one.value - 1.0).abs() <= 1e-12);
            let id = baskakov_apply(n, &catalog::identity(), x, &pol()).unwrap();
            assert_abs_diff_eq!(id.value, x, epsilon = 1e-10 * (1.0 + x));
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(sm_exponential_closed_form(7, 2.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(sm_exponential_closed_form(10, 1.0, 2.0).unwrap(), 0.1490831, epsilon = 5e-8);
        let lim = (-2.0f64).exp();
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 100_000] {
            let d = (sm_exponential_closed_form(n, 1.0, 2.0).unwrap() - lim).abs();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-5);
        assert!(sm_exponential_closed_form(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn moment_examples() {
        assert_eq!(sm_moment(3, 1, 2.0).unwrap(), 6.0);
        assert_eq!(sm_moment(3, 2, 2.0).unwrap(), 42.0);
        assert_eq!(sm_moment(1, 4, 1.0).unwrap(), 15.0);
        assert!(sm_moment(1, 5, 1.0).is_err());
        assert!(sm_moment(1, 0, 1.0).is_err());
    }

    #[test]
    fn fourth_moment_examples() {
        assert_eq!(sm_centered_fourth_moment_bound(1, 1.0), 4.0);
        assert_eq!(sm_centered_fourth_moment_bound(9, 0.0), 0.0);
        assert_abs_diff_eq!(sm_centered_fourth_moment_bound(10, 2.0), 0.122, epsilon = 1e-15);
        assert_abs_diff_eq!(sm_centered_fourth_moment_root(1, 1.0), 2.0, epsilon = 1e-15);
        // Expansion of the raw moments: E[(T-m)^4] = 3m² + m.
        for (n, x) in [(1u32, 1.0), (4, 0.3), (10, 2.0)] {
            let m = n as f64 * x;
            let raw: [f64; 5] = [1.0, sm_moment(n, 1, x).unwrap(), sm_moment(n, 2, x).unwrap(), sm_moment(n, 3, x).unwrap(), sm_moment(n, 4, x).unwrap()];
            let central = raw[4] - 4.0 * m * raw[3] + 6.0 * m * m * raw[2] - 4.0 * m.powi(3) * raw[1] + m.powi(4);
            let nf = n as f64;
            assert_abs_diff_eq!(central / nf.powi(4), sm_centered_fourth_moment_bound(n, x), epsilon = 1e-12);
        }
    }

    #[test]
    fn tail_bound_examples() {
        assert_abs_diff_eq!(poisson_tail_bound(100, 1.0, 1.0), 2.0 * (-25.0f64).exp(), epsilon = 1e-25);
        assert_abs_diff_eq!(poisson_tail_bound(100, 1.0, 1.0), 2.78e-11, epsilon = 1e-13);
        assert_abs_diff_eq!(poisson_tail_bound(1, 0.0, 1.0), 2.0 * (-0.5f64).exp(), epsilon = 1e-15);
        assert!(poisson_tail_bound(1, 0.0, 1.0) > 1.0);
        let mut prev = f64::INFINITY;
        for n in [1, 2, 5, 20, 100] {
            let b = poisson_tail_bound(n, 0.7, 0.3);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn truncation_index_examples() {
        let p = pol();
        assert_eq!(truncation_index(5, 0.0, &p).unwrap(), 0);
        // P(Poisson(10) > 38) > 1e-12 >= P(Poisson(10) > 39), from an
        // independent survival-function evaluation.
        assert_eq!(truncation_index(10, 1.0, &p).unwrap(), 39);
        let tight = TruncationPolicy::new(1e-12, 30).unwrap();
        assert!(matches!(truncation_index(10, 1.0, &tight), Err(Error::TruncationFailure { .. })));
    }

    #[test]
    fn positivity_and_preservation() {
        let p = pol();
        for f in catalog::all() {
            for n in [1, 3, 20] {
                for x in [0.0, 0.1, 0.5, 0.9, 1.0] {
                    assert!(bernstein_apply(n, &f, x).unwrap() >= 0.0);
                }
                for x in [0.0, 0.4, 3.0, 15.0] {
                    assert!(sm_apply(n, &f, x, &p).unwrap().value >= 0.0);
                    assert!(baskakov_apply(n, &f, x, &p).unwrap().value >= 0.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn second_moment_identity(n in 1u32..400, x in 0.0f64..40.0) {
            let p = pol();
            let eval = sm_apply(n, &catalog::square(), x, &p).unwrap();
            let expect = x * x + x / n as f64;
            // Cauchy-Schwarz on the dropped terms: E[(T/n)² 1_out] ≤ √(P(out) E[(T/n)⁴])
            let fourth = sm_moment(n, 4, x).unwrap() / (n as f64).powi(4);
            let tail = (eval.omitted_mass * fourth).sqrt();
            prop_assert!((eval.value - expect).abs() <= tail + 1e-14 * (1.0 + expect));
        }

        #[test]
        fn closed_form_agreement(n in 1u32..300, lambda in 0.2f64..4.0, x in 0.0f64..50.0) {
            let p = pol();
            let v = sm_apply(n, &catalog::exp_decay(lambda), x, &p).unwrap().value;
            let c = sm_exponential_closed_form(n, lambda, x).unwrap();
            prop_assert!((v - c).abs() <= p.tail_eps());
        }

        #[test]
        fn truncation_index_monotone(n in 1u32..100, x in 0.0f64..20.0, a in -14.0f64..-2.0, b in -14.0f64..-2.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let small = TruncationPolicy::new(10f64.powf(lo), 1_000_000).unwrap();
            let large = TruncationPolicy::new(10f64.powf(hi), 1_000_000).unwrap();
            prop_assert!(truncation_index(n, x, &large).unwrap() <= truncation_index(n, x, &small).unwrap());
        }
    }
}
