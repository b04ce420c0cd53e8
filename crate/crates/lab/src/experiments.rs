//! The five experiment drivers. Each returns a [`ConvergenceReport`] whose
//! first row echoes the resolved configuration and worker count.
//!
//! Monotone-trend rows carry the previous measurement (plus any stated
//! slack) as their bound, and the last row of a ladder additionally carries
//! the declared tolerance, so each verdict can be recomputed from the row.

use rayon::prelude::*;
use serde_json::json;
use szasz_core::diffusion::{chain_scaling_moments, semigroup_sampler, terminal_sampler, DiffusionKind, Method};
use szasz_core::funcspace::{catalog, lipschitz_estimate_d2, weighted_max, Grid, TestFunction, Weight};
use szasz_core::generator::{
    fit_rate, generator_apply, m_alpha, semigroup_rate_bound, voronovskaya_bound, voronovskaya_residual_at,
    GeneratorKind,
};
use szasz_core::iterates::{bernstein_kernel, chain_sampler, kelisky_rivlin_reference, kernel_iterate, sm_kernel_for_range};
use szasz_core::montecarlo::derive_seed;
use szasz_core::operators::{sm_apply, sm_exponential_closed_form};
use szasz_core::stats::{binomial_stderr, ks_two_sample, zero_frequency};
use szasz_core::TruncationPolicy;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::ReportRow;
use crate::{parallel, LabError};

/// Roundoff allowance for comparisons between two exact computations.
pub const ROUNDOFF_SLACK: f64 = 64.0 * f64::EPSILON;

/// Tolerance for the chain scaling identities.
pub const SCALING_TOLERANCE: f64 = 1e-10;

/// Lattice points per `n` at which the scaling identities are checked.
const SCALING_POINTS: usize = 5;

const MAX_KERNEL_SAFETY: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub workers: usize,
    pub rows: Vec<ReportRow>,
    /// Least-squares log-log slope, when the experiment fits one.
    pub fitted_rate: Option<f64>,
}

impl ConvergenceReport {
    fn new(config: &ExperimentConfig, workers: usize) -> Self {
        let echo = ReportRow::new(
            format!("{}/config", config.experiment.name()),
            json!({ "config": config.to_json(), "workers": workers }),
            f64::NAN,
        );
        Self { experiment: config.experiment, config: config.clone(), workers, rows: vec![echo], fitted_rate: None }
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Rows whose experiment name is exactly `name`.
    pub fn rows_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.experiment == name)
    }
}

/// `⌊n·t⌋`, guarded against a floating-point shortfall when `n·t` is integral.
pub fn floor_nt(n: u32, t: f64) -> usize {
    (n as f64 * t + 1e-9).floor() as usize
}

pub fn run(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    config.validate()?;
    match config.experiment {
        Experiment::Voronovskaya => run_voronovskaya(config, workers),
        Experiment::Semigroup => run_semigroup_convergence(config, workers),
        Experiment::KeliskyRivlin => run_kelisky_rivlin(config, workers),
        Experiment::Korovkin => run_korovkin(config, workers),
        Experiment::WeakConvergence => run_weak_convergence(config, workers),
    }
}

fn function(config: &ExperimentConfig) -> Result<TestFunction, LabError> {
    catalog::by_label(&config.function_label)
        .ok_or_else(|| LabError::Config(format!("unknown function `{}`", config.function_label)))
}

fn policy(config: &ExperimentConfig) -> Result<TruncationPolicy, LabError> {
    Ok(TruncationPolicy::new(config.tail_eps, TruncationPolicy::default().max_terms())?)
}

/// Bound for entry `i` of a ladder that must decrease (`prev`, if any) and
/// end at or below `tolerance`.
fn trend_bound(prev: Option<f64>, last: bool, tolerance: f64) -> Option<f64> {
    match (prev, last) {
        (Some(p), true) => Some(p.min(tolerance)),
        (Some(p), false) => Some(p),
        (None, true) => Some(tolerance),
        (None, false) => None,
    }
}

pub fn run_voronovskaya(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    let mut report = ConvergenceReport::new(config, workers);
    let f = function(config)?;
    let grid = config.grid.build()?;
    let policy = policy(config)?;
    let residuals = config
        .n_ladder
        .par_iter()
        .map(|&n| voronovskaya_residual_at(n, &f, config.alpha, &grid, &policy))
        .collect::<Result<Vec<_>, _>>()?;
    let exact = residuals.iter().all(|&(r, _)| r <= config.exact_tolerance);
    let lip = f.lip_d2();
    let bounded = !exact && config.alpha > 1.5 && lip.is_some();
    let mode = if exact {
        "exact"
    } else if bounded {
        "bound"
    } else {
        "residual-only"
    };
    for (&n, &(r, argmax)) in config.n_ladder.iter().zip(&residuals) {
        let mut params = json!({
            "n": n,
            "alpha": config.alpha,
            "function_label": config.function_label,
            "argmax": argmax,
            "mode": mode,
        });
        let mut row = ReportRow::new("voronovskaya", json!(null), r);
        if exact {
            row = row.bound(config.exact_tolerance).pass(r <= config.exact_tolerance);
        } else if bounded {
            let lip = lip.expect("checked above");
            let b = voronovskaya_bound(n, config.alpha, lip)?;
            params["m_alpha"] = json!(m_alpha(config.alpha)?);
            params["lip_d2"] = json!(lip);
            row = row.bound(b).pass(r <= b);
        }
        if let Some(s) = f.sup_bound() {
            row = row.error_budget(n as f64 * config.tail_eps * s);
        }
        row.param_json = params.to_string();
        report.rows.push(row);
    }
    if bounded {
        let (ns, errs): (Vec<u32>, Vec<f64>) = config
            .n_ladder
            .iter()
            .zip(&residuals)
            .filter(|(_, &(r, _))| r > 0.0)
            .map(|(&n, &(r, _))| (n, r))
            .unzip();
        if ns.len() >= 3 {
            let slope = fit_rate(&ns, &errs)?;
            let [lo, hi] = config.slope_range;
            report.fitted_rate = Some(slope);
            report.rows.push(
                ReportRow::new("voronovskaya/slope", json!({ "n_ladder": ns, "low": lo, "high": hi }), slope)
                    .bound(hi)
                    .pass((lo..=hi).contains(&slope)),
            );
        }
    }
    Ok(report)
}

/// `P_n^k f(x)` for every panel point, with per-point error budgets, from a
/// kernel whose cutoff grows until the budget is at most `k·tail_eps`
/// (capped by `config.kernel_budget`).
fn iterate_on_panel(
    n: u32,
    k: usize,
    f: &TestFunction,
    config: &ExperimentConfig,
) -> Result<(Vec<(f64, f64)>, serde_json::Value), LabError> {
    if k == 0 {
        let values = config.x_panel.iter().map(|&x| Ok((f.try_eval(x)?, 0.0))).collect::<Result<_, LabError>>()?;
        return Ok((values, json!({ "cutoff": null, "safety": null })));
    }
    let x_max = config.x_panel.iter().fold(0.0f64, |m, &x| m.max(x));
    let target = config.kernel_budget.min(k as f64 * config.tail_eps);
    let mut safety = 1.5;
    loop {
        let kernel = sm_kernel_for_range(n, x_max, config.tail_eps, safety)?;
        let lattice = kernel_iterate(&kernel, f, k - 1)?;
        let values = config
            .x_panel
            .iter()
            .map(|&x| kernel.step_from(&lattice, x))
            .collect::<Result<Vec<_>, _>>()?;
        let worst = values.iter().fold(0.0f64, |m, v| m.max(v.1));
        if worst <= target || safety >= MAX_KERNEL_SAFETY {
            return Ok((values, json!({ "cutoff": kernel.cutoff(), "safety": safety })));
        }
        safety *= 1.5;
    }
}

pub fn run_semigroup_convergence(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    let mut report = ConvergenceReport::new(config, workers);
    let f = function(config)?;
    let weight = Weight::new(config.alpha)?;
    let t = config.t;
    let references: Vec<(f64, f64)> = match f.exponential_rate() {
        Some(lambda) => config
            .x_panel
            .iter()
            .map(|&x| Ok((szasz_core::diffusion::feller_semigroup_closed_form(lambda, x, t)?, 0.0)))
            .collect::<Result<_, LabError>>()?,
        None => config
            .x_panel
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if t == 0.0 {
                    return Ok((f.try_eval(x)?, 0.0));
                }
                let draw = semigroup_sampler(DiffusionKind::Feller, t, x, f.clone(), Method::Exact)?;
                let e = parallel::estimate(config.samples, derive_seed(config.seed, i as u64), workers, &draw);
                Ok((e.mean, e.stderr))
            })
            .collect::<Result<_, LabError>>()?,
    };
    let reference_kind = if f.exponential_rate().is_some() { "closed-form" } else { "monte-carlo" };

    let grid = config.grid.build()?;
    let (norm_af, _) = weighted_max(&grid, weight, |x| generator_apply(GeneratorKind::SmHalfX, &f, x))?;
    let lip = match f.lip_d2() {
        Some(l) => l,
        None => lipschitz_estimate_d2(&f, &grid)?,
    };
    let flow = |s: f64| match f.exponential_rate() {
        Some(lambda) => (lambda / (1.0 + lambda * s / 2.0)).powi(3),
        None => lip,
    };

    let iterates = config
        .n_ladder
        .par_iter()
        .map(|&n| iterate_on_panel(n, floor_nt(n, t), &f, config))
        .collect::<Result<Vec<_>, _>>()?;

    let last = config.n_ladder.len() - 1;
    let mut prev = None;
    for (i, (&n, (values, kernel_info))) in config.n_ladder.iter().zip(&iterates).enumerate() {
        let mut discrepancy = 0.0f64;
        let mut stderr = 0.0f64;
        let mut budget = 0.0f64;
        for ((&x, &(v, b)), &(r, se)) in config.x_panel.iter().zip(values).zip(&references) {
            let w = weight.eval(x)?;
            discrepancy = discrepancy.max(w * (v - r).abs());
            stderr = stderr.max(w * se);
            budget = budget.max(w * b);
        }
        let rate_bound = semigroup_rate_bound(n, t, config.alpha, norm_af, lip, flow).ok();
        let params = json!({
            "n": n,
            "k": floor_nt(n, t),
            "t": t,
            "alpha": config.alpha,
            "function_label": config.function_label,
            "x_panel": config.x_panel,
            "reference": reference_kind,
            "rate_bound": rate_bound,
            "rule": "strictly below previous; last at most tolerance",
            "tolerance": config.tolerance,
            "kernel": kernel_info,
        });
        let bound = trend_bound(prev, i == last, config.tolerance);
        let pass = match prev {
            Some(p) => discrepancy < p,
            None => true,
        } && (i != last || discrepancy <= config.tolerance);
        let mut row = ReportRow::new("semigroup", params, discrepancy).error_budget(budget).pass(pass);
        row.bound = bound;
        if reference_kind == "monte-carlo" {
            row = row.stderr(stderr);
        }
        report.rows.push(row);
        prev = Some(discrepancy);
    }
    Ok(report)
}

pub fn run_kelisky_rivlin(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    let mut report = ConvergenceReport::new(config, workers);
    let f = function(config)?;
    let n = config.bernstein_n;
    let kernel = bernstein_kernel(n)?;
    let limit: Vec<f64> = (0..=n).map(|i| kelisky_rivlin_reference(&f, i as f64 / n as f64)).collect::<Result<_, _>>()?;
    let scale = (0..=n).fold(1.0f64, |m, i| m.max(f.eval(i as f64 / n as f64).abs()));
    let floor = 8.0 * f64::EPSILON * scale;
    let mut prev: Option<f64> = None;
    for k in 1..=config.k_max {
        let lattice = kernel_iterate(&kernel, &f, k as usize)?;
        let deviation = lattice.values().iter().zip(&limit).fold(0.0f64, |m, (v, l)| m.max((v - l).abs()));
        let last = k == config.k_max;
        let mut bound = prev.map(|p| p + floor);
        if last {
            bound = Some(bound.map_or(config.kr_tolerance, |b| b.min(config.kr_tolerance)));
        }
        let pass = bound.is_none_or(|b| deviation <= b);
        let params = json!({ "n": n, "k": k, "function_label": config.function_label, "roundoff_floor": floor });
        let mut row = ReportRow::new("kelisky-rivlin", params, deviation).pass(pass);
        row.bound = bound;
        report.rows.push(row);
        prev = Some(deviation);
    }
    Ok(report)
}

pub fn run_korovkin(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    let mut report = ConvergenceReport::new(config, workers);
    if config.lambdas.windows(2).any(|w| w[1] <= w[0]) || config.lambdas[0] <= 0.0 {
        return Err(LabError::Config("Korovkin rates must satisfy 0 < λ1 < λ2 < λ3".into()));
    }
    let grid = config.grid.build()?;
    let policy = policy(config)?;
    let weight = Weight::new(config.alpha)?;
    let last = config.n_ladder.len() - 1;
    for &lambda in &config.lambdas {
        let f = catalog::exp_decay(lambda);
        let measured = config
            .n_ladder
            .par_iter()
            .map(|&n| korovkin_errors(n, lambda, &f, &grid, weight, &policy))
            .collect::<Result<Vec<_>, LabError>>()?;
        let mut prev = None;
        for (i, (&n, &(agreement, norm))) in config.n_ladder.iter().zip(&measured).enumerate() {
            let params = json!({ "n": n, "lambda": lambda, "slack": ROUNDOFF_SLACK, "grid_max": grid.max() });
            report.rows.push(
                ReportRow::new("korovkin/closed-form", params, agreement)
                    .bound(config.tail_eps)
                    .pass(agreement <= config.tail_eps + ROUNDOFF_SLACK),
            );
            let params = json!({
                "n": n,
                "lambda": lambda,
                "alpha": config.alpha,
                "rule": "strictly below previous; last at most tolerance",
                "tolerance": config.tolerance,
            });
            let pass = prev.is_none_or(|p| norm < p) && (i != last || norm <= config.tolerance);
            let mut row = ReportRow::new("korovkin/norm", params, norm).error_budget(config.tail_eps).pass(pass);
            row.bound = trend_bound(prev, i == last, config.tolerance);
            report.rows.push(row);
            prev = Some(norm);
        }
    }
    Ok(report)
}

/// `(max |series - closed form|, ‖P_n f_λ - f_λ‖_w)` over the grid.
fn korovkin_errors(
    n: u32,
    lambda: f64,
    f: &TestFunction,
    grid: &Grid,
    weight: Weight,
    policy: &TruncationPolicy,
) -> Result<(f64, f64), LabError> {
    let mut agreement = 0.0f64;
    let mut norm = 0.0f64;
    for &x in grid.points() {
        let series = sm_apply(n, f, x, policy)?.value;
        let closed = sm_exponential_closed_form(n, lambda, x)?;
        agreement = agreement.max((series - closed).abs());
        norm = norm.max(weight.eval(x)? * (series - f.eval(x)).abs());
    }
    Ok((agreement, norm))
}

pub fn run_weak_convergence(config: &ExperimentConfig, workers: usize) -> Result<ConvergenceReport, LabError> {
    let mut report = ConvergenceReport::new(config, workers);
    let (x, t, samples) = (config.x, config.t, config.samples);
    if !(t > 0.0) {
        return Err(LabError::Config("weak convergence needs t > 0".into()));
    }
    let exact_draw = terminal_sampler(DiffusionKind::Feller, t, x, Method::Exact)?;
    let exact = parallel::collect(samples, derive_seed(config.seed, 0), workers, &exact_draw);
    let exact_zero = zero_frequency(&exact);
    let last = config.n_ladder.len() - 1;
    let mut prev_ks: Option<f64> = None;
    let mut prev_ext: Option<(f64, f64)> = None;
    for (i, &n) in config.n_ladder.iter().enumerate() {
        let k = floor_nt(n, t);
        let chain = if k == 0 {
            vec![x; samples as usize]
        } else {
            let draw = chain_sampler(n, k as u32, x, catalog::identity())?;
            parallel::collect(samples, derive_seed(config.seed, n as u64), workers, &draw)
        };
        let ks = ks_two_sample(&chain, &exact);
        let params = json!({
            "n": n, "k": k, "x": x, "t": t, "samples": samples,
            "rule": "at most previous; last at most ks_tolerance",
            "ks_tolerance": config.ks_tolerance,
        });
        let bound = trend_bound(prev_ks, i == last, config.ks_tolerance);
        let mut row = ReportRow::new("weak-convergence/ks", params, ks).pass(bound.is_none_or(|b| ks <= b));
        row.bound = bound;
        report.rows.push(row);
        prev_ks = Some(ks);

        let chain_zero = zero_frequency(&chain);
        let diff = (chain_zero - exact_zero).abs();
        let se = (binomial_stderr(chain_zero, samples).powi(2) + binomial_stderr(exact_zero, samples).powi(2)).sqrt();
        let (bound, slack) = match prev_ext {
            Some((p, pse)) => {
                let slack = 3.0 * (se * se + pse * pse).sqrt();
                (Some(p + slack), slack)
            }
            None => (None, 0.0),
        };
        let params = json!({
            "n": n, "k": k, "x": x, "t": t, "samples": samples,
            "chain_extinction": chain_zero, "exact_extinction": exact_zero,
            "rule": "at most previous plus slack", "slack": slack,
        });
        let mut row = ReportRow::new("weak-convergence/extinction", params, diff)
            .stderr(se)
            .pass(bound.is_none_or(|b| diff <= b));
        row.bound = bound;
        report.rows.push(row);
        prev_ext = Some((diff, se));

        let mut points: Vec<f64> = Vec::new();
        for &y in &chain {
            if points.len() == SCALING_POINTS {
                break;
            }
            if !points.contains(&y) {
                points.push(y);
            }
        }
        let mut worst = 0.0f64;
        for &y in &points {
            let (drift, diffusion) = chain_scaling_moments(n, y)?;
            worst = worst.max(drift.abs()).max((diffusion - y).abs());
        }
        report.rows.push(
            ReportRow::new("weak-convergence/scaling", json!({ "n": n, "points": points }), worst)
                .bound(SCALING_TOLERANCE)
                .pass(worst <= SCALING_TOLERANCE),
        );
    }
    Ok(report)
}
