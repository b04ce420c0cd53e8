//! The limiting diffusions: Feller's `dY = √Y dW` on `[0, ∞)` and
//! Wright–Fisher `dX = √(X(1-X)) dW` on `[0, 1]`, with Monte Carlo estimates
//! of `P_t f(x) = E[f(Y_t(x))]`.
//!
//! Feller transitions can be drawn exactly as a Poisson mixture of Gamma
//! laws, `N ~ Poisson(2x/t)`, `Y = Gamma(N, t/2)` (`Y = 0` when `N = 0`),
//! whose Laplace transform is `exp(-λx/(1 + λt/2))`. Both models also have
//! a clamped Euler–Maruyama scheme that freezes at absorbing states.

#[allow(unused_imports)]
use num_traits::Float;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::funcspace::TestFunction;
use crate::iterates::poisson_draw;
use crate::montecarlo::{self, MonteCarloEstimate, StreamRng};
use crate::operators::{poisson_tail_bound, sm_moment};

/// Default Euler time step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    ClampAtZero,
    ClampUnitInterval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerConfig {
    dt: f64,
    boundary: Boundary,
}

impl EulerConfig {
    pub fn new(dt: f64, boundary: Boundary) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("Euler step must be positive and finite"));
        }
        Ok(Self { dt, boundary })
    }

    pub fn feller(dt: f64) -> Result<Self> {
        Self::new(dt, Boundary::ClampAtZero)
    }

    pub fn wright_fisher(dt: f64) -> Result<Self> {
        Self::new(dt, Boundary::ClampUnitInterval)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffusionKind {
    Feller,
    WrightFisher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Exact,
    Euler(EulerConfig),
}

/// One exact draw of `Y_t` given `Y_0 = x`.
pub fn feller_exact_step(x: f64, t: f64, rng: &mut StreamRng) -> f64 {
    debug_assert!(t > 0.0 && x >= 0.0);
    let count = poisson_draw(2.0 * x / t, rng);
    if count == 0 {
        return 0.0;
    }
    let g = Gamma::new(count as f64, t / 2.0).expect("positive shape and scale");
    g.sample(rng)
}

fn step_count(total: f64, dt: f64) -> u64 {
    (total / dt - 1e-9).ceil().max(1.0) as u64
}

/// Runs `y ← clamp(y + σ(y)√h Z)` up to time `total`, the last step
/// shortened to land on `total`.
fn euler_path<S, C>(x: f64, total: f64, dt: f64, sigma: S, clamp: C, absorbed: impl Fn(f64) -> bool, rng: &mut StreamRng) -> f64
where
    S: Fn(f64) -> f64,
    C: Fn(f64) -> f64,
{
    let steps = step_count(total, dt);
    let mut y = x;
    let mut elapsed = 0.0;
    for s in 0..steps {
        if absorbed(y) {
            break;
        }
        let h = if s + 1 == steps { total - elapsed } else { dt };
        let z: f64 = StandardNormal.sample(rng);
        y = clamp(y + sigma(y) * h.sqrt() * z);
        elapsed += dt;
    }
    y
}

/// Clamped Euler–Maruyama draw of the Feller diffusion at time `total`.
pub fn feller_euler_path(x: f64, total: f64, config: &EulerConfig, rng: &mut StreamRng) -> f64 {
    euler_path(x, total, config.dt, |y| y.sqrt(), |y| y.max(0.0), |y| y == 0.0, rng)
}

/// Clamped Euler–Maruyama draw of the Wright–Fisher diffusion at time `total`.
pub fn wf_euler_path(x: f64, total: f64, config: &EulerConfig, rng: &mut StreamRng) -> f64 {
    euler_path(
        x,
        total,
        config.dt,
        |y| (y * (1.0 - y)).sqrt(),
        |y| y.clamp(0.0, 1.0),
        |y| y == 0.0 || y == 1.0,
        rng,
    )
}

fn check_state(kind: DiffusionKind, t: f64, x: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid("time must be finite and nonnegative"));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid("starting point must be finite and nonnegative"));
    }
    if kind == DiffusionKind::WrightFisher && x > 1.0 {
        return Err(invalid("Wright-Fisher starting point must lie in [0, 1]"));
    }
    Ok(())
}

/// The replica map `rng ↦ Y_t(x)`.
pub fn terminal_sampler(
    kind: DiffusionKind,
    t: f64,
    x: f64,
    method: Method,
) -> Result<impl Fn(&mut StreamRng) -> f64 + Send + Sync> {
    check_state(kind, t, x)?;
    match (kind, method) {
        (DiffusionKind::WrightFisher, Method::Exact) => {
            return Err(Error::UnsupportedMethod("exact sampling is available for the Feller diffusion only".into()))
        }
        (DiffusionKind::Feller, Method::Euler(c)) if c.boundary != Boundary::ClampAtZero => {
            return Err(invalid("Feller paths need the clamp-at-zero boundary"))
        }
        (DiffusionKind::WrightFisher, Method::Euler(c)) if c.boundary != Boundary::ClampUnitInterval => {
            return Err(invalid("Wright-Fisher paths need the unit-interval boundary"))
        }
        _ => {}
    }
    Ok(move |rng: &mut StreamRng| {
        if t == 0.0 {
            return x;
        }
        match (kind, method) {
            (DiffusionKind::Feller, Method::Exact) => feller_exact_step(x, t, rng),
            (DiffusionKind::Feller, Method::Euler(c)) => feller_euler_path(x, t, &c, rng),
            (DiffusionKind::WrightFisher, Method::Euler(c)) => wf_euler_path(x, t, &c, rng),
            (DiffusionKind::WrightFisher, Method::Exact) => unreachable!(),
        }
    })
}

/// The replica map `rng ↦ f(Y_t(x))`.
pub fn semigroup_sampler(
    kind: DiffusionKind,
    t: f64,
    x: f64,
    f: TestFunction,
    method: Method,
) -> Result<impl Fn(&mut StreamRng) -> f64 + Send + Sync> {
    let terminal = terminal_sampler(kind, t, x, method)?;
    Ok(move |rng: &mut StreamRng| f.eval(terminal(rng)))
}

/// Monte Carlo estimate of `P_t f(x)`. At `t = 0` this is `f(x)` exactly.
#[allow(clippy::too_many_arguments)]
pub fn semigroup_mc(
    kind: DiffusionKind,
    t: f64,
    x: f64,
    f: &TestFunction,
    samples: u64,
    seed: u64,
    workers: usize,
    method: Method,
) -> Result<MonteCarloEstimate> {
    let draw = semigroup_sampler(kind, t, x, f.clone(), method)?;
    if t == 0.0 {
        return Ok(MonteCarloEstimate::exact(f.try_eval(x)?, samples));
    }
    if samples < 2 {
        return Err(invalid("need at least two samples"));
    }
    Ok(montecarlo::estimate(samples, seed, workers, &draw))
}

/// `P_t f_λ(x) = exp(-λx/(1 + λt/2))` for `f_λ = e^{-λx}`.
pub fn feller_semigroup_closed_form(lambda: f64, x: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(x >= 0.0) || !(t >= 0.0) {
        return Err(invalid("need lambda > 0, x >= 0 and t >= 0"));
    }
    Ok((-lambda * x / (1.0 + lambda * t / 2.0)).exp())
}

/// `P(Y_t(x) = 0) = exp(-2x/t)`.
pub fn feller_extinction_probability(x: f64, t: f64) -> f64 {
    (-2.0 * x / t).exp()
}

/// `(n E[G_n(y) - y], n E[(G_n(y) - y)²])` for one chain step
/// `G_n(y) = Poisson(ny)/n` from the lattice point `y`, from the raw
/// Poisson moments. Both are `(0, y)` exactly in exact arithmetic.
pub fn chain_scaling_moments(n: u32, y: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let i = y * n as f64;
    if !(y >= 0.0) || !y.is_finite() || (i - i.round()).abs() > 1e-9 * i.max(1.0) {
        return Err(invalid("y must be a lattice point i/n"));
    }
    let nf = n as f64;
    let m1 = sm_moment(n, 1, y)? / nf;
    let m2 = sm_moment(n, 2, y)? / (nf * nf);
    let drift = nf * (m1 - y);
    let diffusion = nf * (m2 - 2.0 * y * m1 + y * y);
    Ok((drift, diffusion))
}

/// Bound on the probability that one chain step from `y` jumps by `δ` or more.
pub fn chain_jump_bound(n: u32, y: f64, delta: f64) -> Result<f64> {
    if n == 0 || !(y >= 0.0) || !(delta > 0.0) {
        return Err(invalid("need n >= 1, y >= 0 and delta > 0"));
    }
    Ok(poisson_tail_bound(n, y, delta).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::catalog;
    use crate::montecarlo::{collect, stream, Accumulator};
    use crate::stats::{binomial_stderr, ks_two_sample, zero_frequency};
    use alloc::vec::Vec;
    use approx::assert_abs_diff_eq;

    fn exact_draws(x: f64, t: f64, samples: u64, seed: u64) -> Vec<f64> {
        let s = terminal_sampler(DiffusionKind::Feller, t, x, Method::Exact).unwrap();
        collect(samples, seed, 4, &s)
    }

    fn summary(v: &[f64]) -> (f64, f64, f64) {
        let mut acc = Accumulator::default();
        v.iter().for_each(|&y| acc.push(y));
        let e = acc.estimate();
        (e.mean, e.stderr, acc.variance())
    }

    #[test]
    fn zero_is_absorbing() {
        let mut rng = stream(1, 0);
        let c = EulerConfig::feller(DEFAULT_DT).unwrap();
        let w = EulerConfig::wright_fisher(DEFAULT_DT).unwrap();
        for _ in 0..100 {
            assert_eq!(feller_exact_step(0.0, 1.0, &mut rng), 0.0);
            assert_eq!(feller_euler_path(0.0, 1.0, &c, &mut rng), 0.0);
            assert_eq!(wf_euler_path(0.0, 1.0, &w, &mut rng), 0.0);
            assert_eq!(wf_euler_path(1.0, 1.0, &w, &mut rng), 1.0);
        }
    }

    #[test]
    fn exact_moments_at_unit_point() {
        let v = exact_draws(1.0, 1.0, 1_000_000, 11);
        let (mean, se, var) = summary(&v);
        assert!((mean - 1.0).abs() <= 3.0 * se, "mean {mean} se {se}");
        assert!((var - 1.0).abs() <= 0.02, "var {var}");
        let p = (-2.0f64).exp();
        let freq = zero_frequency(&v);
        assert!((freq - p).abs() <= 3.0 * binomial_stderr(p, v.len() as u64), "freq {freq}");
    }

    #[test]
    fn exact_transform_matches_closed_form() {
        assert_abs_diff_eq!(feller_semigroup_closed_form(1.0, 2.0, 1.0).unwrap(), 0.263597, epsilon = 5e-7);
        assert_eq!(feller_semigroup_closed_form(2.0, 0.0, 3.0).unwrap(), 1.0);
        assert_eq!(feller_semigroup_closed_form(2.0, 1.5, 0.0).unwrap(), (-3.0f64).exp());
        for lambda in [1.0, 2.0, 3.0] {
            let f = catalog::exp_decay(lambda);
            let est = semigroup_mc(DiffusionKind::Feller, 1.0, 2.0, &f, 200_000, 5, 3, Method::Exact).unwrap();
            let reference = feller_semigroup_closed_form(lambda, 2.0, 1.0).unwrap();
            assert!((est.mean - reference).abs() <= 3.0 * est.stderr, "lambda {lambda}: {est:?} vs {reference}");
        }
    }

    #[test]
    fn euler_agrees_with_exact_law() {
        let exact = exact_draws(1.0, 1.0, 100_000, 21);
        let c = EulerConfig::feller(DEFAULT_DT).unwrap();
        let s = terminal_sampler(DiffusionKind::Feller, 1.0, 1.0, Method::Euler(c)).unwrap();
        let euler = collect(100_000, 22, 4, &s);
        assert!(ks_two_sample(&exact, &euler) <= 0.02);
        let (mean, se, _) = summary(&euler);
        assert!((mean - 1.0).abs() <= 4.0 * se);
    }

    #[test]
    fn euler_extinction_approaches_exact_value() {
        let p = feller_extinction_probability(1.0, 1.0);
        let freq = |dt: f64| {
            let c = EulerConfig::feller(dt).unwrap();
            let s = terminal_sampler(DiffusionKind::Feller, 1.0, 1.0, Method::Euler(c)).unwrap();
            zero_frequency(&collect(100_000, 31, 2, &s))
        };
        let (coarse, fine) = (freq(1e-1), freq(1e-3));
        assert!((fine - p).abs() < (coarse - p).abs(), "coarse {coarse} fine {fine} exact {p}");
    }

    #[test]
    fn wright_fisher_heterozygosity_decays() {
        let c = EulerConfig::wright_fisher(DEFAULT_DT).unwrap();
        let h = TestFunction::new("het", |x| x * (1.0 - x));
        let est = semigroup_mc(DiffusionKind::WrightFisher, 1.0, 0.5, &h, 50_000, 41, 4, Method::Euler(c)).unwrap();
        let reference = 0.25 * (-1.0f64).exp();
        assert!((est.mean - reference).abs() <= 4.0 * est.stderr, "{est:?}");
        let mean = semigroup_mc(DiffusionKind::WrightFisher, 1.0, 0.3, &catalog::identity(), 50_000, 42, 4, Method::Euler(c))
            .unwrap();
        assert!((mean.mean - 0.3).abs() <= 4.0 * mean.stderr);
    }

    #[test]
    fn extinction_is_monotone() {
        let freq = |x: f64, t: f64| zero_frequency(&exact_draws(x, t, 40_000, 51));
        let in_x: Vec<f64> = [0.25, 0.5, 1.0, 2.0].iter().map(|&x| freq(x, 1.0)).collect();
        assert!(in_x.windows(2).all(|w| w[1] <= w[0]), "{in_x:?}");
        let in_t: Vec<f64> = [0.5, 1.0, 2.0, 4.0].iter().map(|&t| freq(1.0, t)).collect();
        assert!(in_t.windows(2).all(|w| w[1] >= w[0]), "{in_t:?}");
    }

    #[test]
    fn semigroup_edge_cases() {
        let f = catalog::exp_decay(1.0);
        let e = semigroup_mc(DiffusionKind::Feller, 0.0, 2.0, &f, 10, 1, 1, Method::Exact).unwrap();
        assert_eq!((e.mean, e.stderr), ((-2.0f64).exp(), 0.0));
        let e = semigroup_mc(DiffusionKind::Feller, 1.5, 2.0, &catalog::constant(3.0), 1000, 1, 2, Method::Exact).unwrap();
        assert_eq!((e.mean, e.stderr), (3.0, 0.0));
        let wf = semigroup_mc(DiffusionKind::WrightFisher, 1.0, 0.5, &f, 100, 1, 1, Method::Exact);
        assert!(matches!(wf, Err(Error::UnsupportedMethod(_))));
        let c = EulerConfig::wright_fisher(1e-2).unwrap();
        assert!(semigroup_mc(DiffusionKind::Feller, 1.0, 0.5, &f, 100, 1, 1, Method::Euler(c)).is_err());
        assert!(EulerConfig::feller(0.0).is_err());
    }

    #[test]
    fn reruns_are_bit_identical() {
        let f = catalog::x_exp_neg();
        let run = || semigroup_mc(DiffusionKind::Feller, 1.0, 1.0, &f, 10_001, 77, 3, Method::Exact).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn scaling_moments() {
        assert_eq!(chain_scaling_moments(7, 0.0).unwrap(), (0.0, 0.0));
        let (d, v) = chain_scaling_moments(10, 2.0).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        assert!(chain_scaling_moments(10, 0.123).is_err());
        assert!(chain_jump_bound(10, 1.0, 0.5).unwrap() <= 1.0);
    }

    #[test]
    fn scaling_moments_brute_force() {
        // n E[(G - y)^2] by direct summation over Poisson(3) at n = 3, y = 1.
        let (n, y) = (3.0f64, 1.0f64);
        let lambda = n * y;
        let mut p = (-lambda).exp();
        let (mut first, mut second) = (0.0, 0.0);
        for j in 0..200 {
            if j > 0 {
                p *= lambda / j as f64;
            }
            let g = j as f64 / n;
            first += p * (g - y);
            second += p * (g - y) * (g - y);
        }
        assert_abs_diff_eq!(n * first, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(n * second, 1.0, epsilon = 1e-10);
        let (d, v) = chain_scaling_moments(3, 1.0).unwrap();
        assert_abs_diff_eq!(d, n * first, epsilon = 1e-10);
        assert_abs_diff_eq!(v, n * second, epsilon = 1e-10);
    }
}
