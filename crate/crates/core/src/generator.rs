//! Limiting generators `a(x) f''(x)`, the Voronovskaya residual, the
//! constant `M_α` and the assembled iterate-to-semigroup rate bound.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::funcspace::{second_derivative, weighted_max, Grid, TestFunction, Weight, DEFAULT_FD_STEP};
use crate::operators::{bernstein_apply, sm_apply, TruncationPolicy};

/// Tolerance absorbing finite-difference error in the maximum-principle check.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-6;

/// Panels of the composite trapezoid rule in [`semigroup_rate_bound`].
pub const QUADRATURE_PANELS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    /// `a(x) = x/2`, the Szász–Mirakyan limit.
    SmHalfX,
    /// `a(x) = x(1-x)/2` on `[0, 1]`, the Bernstein limit.
    WrightFisher,
    /// `a(x) = x(x+1)/2`, obtained heuristically for Baskakov.
    BaskakovHeuristic,
}

impl GeneratorKind {
    pub fn coefficient(&self, x: f64) -> f64 {
        match self {
            GeneratorKind::SmHalfX => x / 2.0,
            GeneratorKind::WrightFisher => x * (1.0 - x) / 2.0,
            GeneratorKind::BaskakovHeuristic => x * (x + 1.0) / 2.0,
        }
    }

    pub fn is_experimental(&self) -> bool {
        matches!(self, GeneratorKind::BaskakovHeuristic)
    }

    fn is_boundary(&self, x: f64) -> bool {
        match self {
            GeneratorKind::WrightFisher => x == 0.0 || x == 1.0,
            _ => x == 0.0,
        }
    }
}

/// `A f(x) = a(x) f''(x)`, exactly zero on the degenerate boundary.
pub fn generator_apply(kind: GeneratorKind, f: &TestFunction, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid("generator is defined on [0, inf)"));
    }
    if kind == GeneratorKind::WrightFisher && x > 1.0 {
        return Err(invalid("Wright-Fisher generator is defined on [0, 1]"));
    }
    if kind.is_boundary(x) {
        return Ok(0.0);
    }
    let h = if kind == GeneratorKind::WrightFisher {
        DEFAULT_FD_STEP.min((1.0 - x) / 4.0)
    } else {
        DEFAULT_FD_STEP
    };
    Ok(kind.coefficient(x) * second_derivative(f, x, h))
}

/// `sup_x (3^{3/4} x^{3/2} + x^{3/4}) w_α(x)`, written as the sum of the two
/// separate suprema; requires `α > 3/2`.
pub fn m_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 1.5) || !alpha.is_finite() {
        return Err(invalid("M_alpha needs alpha > 3/2"));
    }
    let a = 2.0 * alpha - 3.0;
    let b = 4.0 * alpha - 3.0;
    let first = 3f64.powf(0.75) * (a / (2.0 * alpha)) * (3.0 / a).powf(3.0 / (2.0 * alpha));
    let second = (b / (4.0 * alpha)) * (3.0 / b).powf(3.0 / (4.0 * alpha));
    Ok(first + second)
}

/// `M_α Lip(f'') / (6√n)`.
pub fn voronovskaya_bound(n: u32, alpha: f64, lip_d2: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    Ok(m_alpha(alpha)? * lip_d2 / (6.0 * (n as f64).sqrt()))
}

/// `max_{x ∈ grid} w_α(x) |n(P_n f(x) - f(x)) - A f(x)|` with `A = (x/2) d²`.
pub fn voronovskaya_residual(
    n: u32,
    f: &TestFunction,
    alpha: f64,
    grid: &Grid,
    policy: &TruncationPolicy,
) -> Result<f64> {
    voronovskaya_residual_at(n, f, alpha, grid, policy).map(|(v, _)| v)
}

/// As [`voronovskaya_residual`], also returning the maximizing grid point.
pub fn voronovskaya_residual_at(
    n: u32,
    f: &TestFunction,
    alpha: f64,
    grid: &Grid,
    policy: &TruncationPolicy,
) -> Result<(f64, f64)> {
    let weight = Weight::new(alpha)?;
    let nf = n as f64;
    weighted_max(grid, weight, |x| {
        let pn = sm_apply(n, f, x, policy)?.value;
        let fx = f.try_eval(x)?;
        Ok(nf * (pn - fx) - generator_apply(GeneratorKind::SmHalfX, f, x)?)
    })
}

/// Unweighted Bernstein analogue on a grid inside `[0, 1]`:
/// `max |n(B_n f - f) - x(1-x)/2 f''|`.
pub fn wright_fisher_residual(n: u32, f: &TestFunction, grid: &Grid) -> Result<f64> {
    if grid.max() > 1.0 {
        return Err(invalid("Wright-Fisher residual grid must lie in [0, 1]"));
    }
    let nf = n as f64;
    let mut best = 0.0f64;
    for &x in grid.points() {
        let r = nf * (bernstein_apply(n, f, x)? - f.try_eval(x)?)
            - generator_apply(GeneratorKind::WrightFisher, f, x)?;
        best = best.max(r.abs());
    }
    Ok(best)
}

/// Rate bound for `‖P_n^{[nt]} f - P_t f‖_{w_α}`:
/// `(√(t/n) + 1/n)(‖Af‖ + M_α Lip(f'')/(6√n)) + ∫_0^t M_α L(s)/(6√n) ds`
/// where `L(s)` bounds `Lip((P_s f)'')`; the integral uses a 64-panel
/// trapezoid rule.
pub fn semigroup_rate_bound<L>(
    n: u32,
    t: f64,
    alpha: f64,
    norm_af: f64,
    lip_d2: f64,
    lip_d2_along_flow: L,
) -> Result<f64>
where
    L: Fn(f64) -> f64,
{
    if !(t >= 0.0) {
        return Err(invalid("t must be nonnegative"));
    }
    let nf = n as f64;
    let scale = m_alpha(alpha)? / (6.0 * nf.sqrt());
    let head = ((t / nf).sqrt() + 1.0 / nf) * (norm_af + scale * lip_d2);
    let h = t / QUADRATURE_PANELS as f64;
    let integral = if t == 0.0 {
        0.0
    } else {
        let inner: f64 = (1..QUADRATURE_PANELS).map(|j| lip_d2_along_flow(j as f64 * h)).sum();
        h * (0.5 * lip_d2_along_flow(0.0) + inner + 0.5 * lip_d2_along_flow(t))
    };
    Ok(head + scale * integral)
}

/// Least-squares slope of `ln(error)` against `ln(n)`.
pub fn fit_rate(n_values: &[u32], errors: &[f64]) -> Result<f64> {
    if n_values.len() != errors.len() || n_values.len() < 3 {
        return Err(invalid("rate fit needs at least three (n, error) pairs"));
    }
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(invalid("rate fit needs strictly positive errors"));
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct n"));
    }
    Ok(sxy / sxx)
}

/// Outcome of [`positive_max_principle_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxPrincipleOutcome {
    pub passed: bool,
    pub witness: f64,
    pub f_value: f64,
    pub generator_value: f64,
}

/// At the grid maximizer `x₀` of `f`, if `f(x₀) ≥ 0` then `A f(x₀) ≤ tol`.
pub fn positive_max_principle_check(kind: GeneratorKind, f: &TestFunction, grid: &Grid) -> Result<MaxPrincipleOutcome> {
    let mut witness = grid.points()[0];
    let mut f_value = f.try_eval(witness)?;
    for &x in &grid.points()[1..] {
        let v = f.try_eval(x)?;
        if v > f_value {
            witness = x;
            f_value = v;
        }
    }
    let generator_value = generator_apply(kind, f, witness)?;
    let passed = f_value < 0.0 || generator_value <= MAX_PRINCIPLE_TOL;
    Ok(MaxPrincipleOutcome { passed, witness, f_value, generator_value })
}

/// Spot values of the two domain limits `x f''(x) → 0` as `x → 0+` and
/// `w_α(x) x f''(x) → 0` as `x → ∞`, taken at the grid extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WentzellSpotCheck {
    pub near_zero: (f64, f64),
    pub far: (f64, f64),
}

/// Evaluates the Wentzell limits at the smallest positive and the largest
/// grid point. Small values are evidence, not a certificate.
pub fn wentzell_spot_check(f: &TestFunction, grid: &Grid, alpha: f64) -> Result<WentzellSpotCheck> {
    let weight = Weight::new(alpha)?;
    let x0 = grid
        .points()
        .iter()
        .copied()
        .find(|&x| x > 0.0)
        .ok_or_else(|| invalid("grid needs a positive point"))?;
    let x1 = grid.max();
    let near = x0 * second_derivative(f, x0, DEFAULT_FD_STEP.min(x0 / 4.0)).abs();
    let far = weight.eval(x1)? * x1 * second_derivative(f, x1, DEFAULT_FD_STEP).abs();
    Ok(WentzellSpotCheck { near_zero: (x0, near), far: (x1, far) })
}
