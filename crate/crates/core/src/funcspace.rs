//! Weighted function spaces on `[0, ∞)`.
//!
//! Sup-norms over the half line are approximated by maxima over finite
//! grids, so every norm computed here is a lower bound of the true norm.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent float methods exist only when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Default step for finite-difference second derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

pub(crate) type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The weight `w_α(x) = 1/(1 + x^α)` for `α ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    alpha: f64,
}

impl Weight {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(invalid("weight exponent must satisfy alpha >= 1"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(invalid("weight is defined on [0, inf)"));
        }
        Ok(self.at(x))
    }

    /// Unchecked evaluation for points already known to lie in `[0, ∞)`.
    #[inline]
    pub(crate) fn at(&self, x: f64) -> f64 {
        1.0 / (1.0 + x.powf(self.alpha))
    }
}

pub fn weight_eval(alpha: f64, x: f64) -> Result<f64> {
    Weight::new(alpha)?.eval(x)
}

/// A real function on `[0, ∞)` together with whatever analytic data is known
/// about it: its second derivative, a Lipschitz constant of `f''` and a bound
/// on `sup |f|`.
#[derive(Clone)]
pub struct TestFunction {
    label: String,
    eval: RealFn,
    d2: Option<RealFn>,
    lip_d2: Option<f64>,
    sup_bound: Option<f64>,
    exp_rate: Option<f64>,
}

impl TestFunction {
    pub fn new(label: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(eval),
            d2: None,
            lip_d2: None,
            sup_bound: None,
            exp_rate: None,
        }
    }

    pub fn with_d2(mut self, d2: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d2 = Some(Arc::new(d2));
        self
    }

    pub fn with_lip_d2(mut self, lip: f64) -> Self {
        debug_assert!(lip >= 0.0);
        self.lip_d2 = Some(lip);
        self
    }

    pub fn with_sup_bound(mut self, bound: f64) -> Self {
        debug_assert!(bound >= 0.0);
        self.sup_bound = Some(bound);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Evaluates and rejects non-finite values.
    #[inline]
    pub fn try_eval(&self, x: f64) -> Result<f64> {
        let v = (self.eval)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { x })
        }
    }

    /// Analytic second derivative, when known.
    pub fn d2(&self, x: f64) -> Option<f64> {
        self.d2.as_ref().map(|g| g(x))
    }

    pub fn has_d2(&self) -> bool {
        self.d2.is_some()
    }

    pub fn lip_d2(&self) -> Option<f64> {
        self.lip_d2
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    /// `Some(λ)` when this is `x ↦ e^{-λx}`.
    pub fn exponential_rate(&self) -> Option<f64> {
        self.exp_rate
    }

    /// `c·f`, carrying analytic data along.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.eval.clone();
        let mut out = TestFunction::new(alloc::format!("{c}*{}", self.label), move |x| c * f(x));
        if let Some(g) = self.d2.clone() {
            out = out.with_d2(move |x| c * g(x));
        }
        out.lip_d2 = self.lip_d2.map(|l| c.abs() * l);
        out.sup_bound = self.sup_bound.map(|s| c.abs() * s);
        out
    }

    /// `f + g`, without analytic data.
    pub fn sum(&self, other: &TestFunction) -> Self {
        let f = self.eval.clone();
        let g = other.eval.clone();
        TestFunction::new(alloc::format!("{}+{}", self.label, other.label), move |x| f(x) + g(x))
    }

    /// Drops the analytic second derivative and Lipschitz data, leaving only
    /// point evaluations.
    pub fn without_analytic_data(&self) -> Self {
        Self {
            label: self.label.clone(),
            eval: self.eval.clone(),
            d2: None,
            lip_d2: None,
            sup_bound: self.sup_bound,
            exp_rate: self.exp_rate,
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("label", &self.label)
            .field("has_d2", &self.d2.is_some())
            .field("lip_d2", &self.lip_d2)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

/// A strictly increasing finite set of points in `[0, ∞)` starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        match points.first() {
            Some(&p) if p == 0.0 => {}
            _ => return Err(invalid("grid must be nonempty and start at 0")),
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(invalid("grid points must be finite"));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid points must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// `m` equally spaced points on `[0, x_max]`.
    pub fn uniform(x_max: f64, m: usize) -> Result<Self> {
        if !(x_max > 0.0) || m < 2 {
            return Err(invalid("uniform grid needs x_max > 0 and m >= 2"));
        }
        let step = x_max / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|i| i as f64 * step).collect();
        points[m - 1] = x_max;
        Grid::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.points.last().expect("grid is nonempty")
    }

    /// Inserts `factor - 1` equally spaced points into every gap.
    pub fn refine(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut points = Vec::with_capacity((self.len() - 1) * factor + 1);
        for w in self.points.windows(2) {
            let step = (w[1] - w[0]) / factor as f64;
            for j in 0..factor {
                points.push(w[0] + j as f64 * step);
            }
        }
        points.push(self.max());
        Grid { points }
    }

    /// The default half-line grid: `x_max = 50`, 400 geometric points and
    /// 100 uniform points on `(0, 1]`.
    pub fn default_half_line() -> Self {
        make_geometric_grid(50.0, 400, 100).expect("default grid parameters are valid")
    }
}

/// `{0}` together with `dense_head` uniform points `k/dense_head` on `(0, 1]`
/// and `m - 1` geometric points `x_max^{j/(m-1)}`, `j = 1..m-1`.
pub fn make_geometric_grid(x_max: f64, m: usize, dense_head: usize) -> Result<Grid> {
    if !(x_max > 0.0) || !x_max.is_finite() || m < 2 {
        return Err(invalid("geometric grid needs finite x_max > 0 and m >= 2"));
    }
    let mut points = Vec::with_capacity(m + dense_head);
    points.push(0.0);
    for k in 1..=dense_head {
        points.push(k as f64 / dense_head as f64);
    }
    let steps = (m - 1) as f64;
    for j in 1..m {
        points.push(x_max.powf(j as f64 / steps));
    }
    *points.last_mut().expect("m >= 2") = x_max;
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1.0));
    Grid::new(points)
}

/// `max_{x ∈ grid} w_α(x)·|g(x)|` for an arbitrary fallible evaluator.
pub fn weighted_max<F>(grid: &Grid, weight: Weight, mut g: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = 0.0;
    let mut at = grid.points()[0];
    for &x in grid.points() {
        let v = g(x)?;
        if !v.is_finite() {
            return Err(Error::Evaluation { x });
        }
        let wv = weight.at(x) * v.abs();
        if wv > best {
            best = wv;
            at = x;
        }
    }
    Ok((best, at))
}

pub fn weighted_sup_norm(f: &TestFunction, grid: &Grid, alpha: f64) -> Result<f64> {
    let weight = Weight::new(alpha)?;
    weighted_max(grid, weight, |x| f.try_eval(x)).map(|(v, _)| v)
}

/// `f''(x)`: analytic when available, otherwise a second-order finite
/// difference (central when `x ≥ h`, one-sided forward otherwise).
pub fn second_derivative(f: &TestFunction, x: f64, h: f64) -> f64 {
    match f.d2(x) {
        Some(v) => v,
        None => second_derivative_fd(f, x, h),
    }
}

/// Finite-difference second derivative, ignoring any analytic data.
pub fn second_derivative_fd(f: &TestFunction, x: f64, h: f64) -> f64 {
    if x - h >= 0.0 {
        (f.eval(x + h) - 2.0 * f.eval(x) + f.eval(x - h)) / (h * h)
    } else {
        (2.0 * f.eval(x) - 5.0 * f.eval(x + h) + 4.0 * f.eval(x + 2.0 * h) - f.eval(x + 3.0 * h))
            / (h * h)
    }
}

/// Lipschitz constant of `f''`: the supplied value if present, else the
/// largest adjacent-pair slope of `f''` over the grid.
pub fn lipschitz_estimate_d2(f: &TestFunction, grid: &Grid) -> Result<f64> {
    if let Some(l) = f.lip_d2() {
        return Ok(l);
    }
    if grid.len() < 2 {
        return Err(invalid("Lipschitz estimate needs at least two grid points"));
    }
    let d2: Vec<f64> = grid
        .points()
        .iter()
        .map(|&x| second_derivative(f, x, DEFAULT_FD_STEP))
        .collect();
    let slope = grid
        .points()
        .windows(2)
        .zip(d2.windows(2))
        .map(|(x, v)| (v[1] - v[0]).abs() / (x[1] - x[0]))
        .fold(0.0, f64::max);
    Ok(slope)
}

/// The standard test functions.
pub mod catalog {
    use super::TestFunction;
    use alloc::vec::Vec;
    #[allow(unused_imports)]
    use num_traits::Float;

    /// Labels understood by [`by_label`].
    pub const LABELS: [&str; 8] = ["e0", "e1", "e2", "exp1", "exp2", "exp3", "xexp", "lorentz"];

    pub fn constant(c: f64) -> TestFunction {
        TestFunction::new(alloc::format!("const({c})"), move |_| c)
            .with_d2(|_| 0.0)
            .with_lip_d2(0.0)
            .with_sup_bound(c.abs())
    }

    /// `e_0 ≡ 1`.
    pub fn one() -> TestFunction {
        let mut f = constant(1.0);
        f.label = "e0".into();
        f
    }

    /// `e_1(x) = x`.
    pub fn identity() -> TestFunction {
        TestFunction::new("e1", |x| x).with_d2(|_| 0.0).with_lip_d2(0.0)
    }

    /// `e_2(x) = x²`.
    pub fn square() -> TestFunction {
        TestFunction::new("e2", |x| x * x).with_d2(|_| 2.0).with_lip_d2(0.0)
    }

    /// `f_λ(x) = e^{-λx}`; `f'' = λ² e^{-λx}` and `Lip(f'') = λ³`.
    pub fn exp_decay(lambda: f64) -> TestFunction {
        let mut f = TestFunction::new(alloc::format!("exp({lambda})"), move |x| (-lambda * x).exp())
            .with_d2(move |x| lambda * lambda * (-lambda * x).exp())
            .with_lip_d2(lambda * lambda * lambda)
            .with_sup_bound(1.0);
        f.exp_rate = Some(lambda);
        f
    }

    /// `x e^{-x}`; `f''' = (3 - x)e^{-x}` peaks in modulus at 0.
    pub fn x_exp_neg() -> TestFunction {
        TestFunction::new("xexp", |x| x * (-x).exp())
            .with_d2(|x| (x - 2.0) * (-x).exp())
            .with_lip_d2(3.0)
            .with_sup_bound((-1.0f64).exp())
    }

    /// `1/(1+x²)`. `|f'''|` is maximal where `5x⁴ - 10x² + 1 = 0`.
    pub fn lorentzian() -> TestFunction {
        let x2 = 1.0 - 2.0 / 5.0f64.sqrt();
        let x = x2.sqrt();
        let lip = 24.0 * x * (1.0 - x2) / (1.0 + x2).powi(4);
        TestFunction::new("lorentz", |x| 1.0 / (1.0 + x * x))
            .with_d2(|x| (6.0 * x * x - 2.0) / (1.0 + x * x).powi(3))
            .with_lip_d2(lip)
            .with_sup_bound(1.0)
    }

    pub fn by_label(label: &str) -> Option<TestFunction> {
        let mut f = match label {
            "e0" => return Some(one()),
            "e1" => identity(),
            "e2" => square(),
            "exp1" => exp_decay(1.0),
            "exp2" => exp_decay(2.0),
            "exp3" => exp_decay(3.0),
            "xexp" => x_exp_neg(),
            "lorentz" => lorentzian(),
            _ => return None,
        };
        f.label = label.into();
        Some(f)
    }

    pub fn all() -> Vec<TestFunction> {
        LABELS.iter().filter_map(|l| by_label(l)).collect()
    }
}
