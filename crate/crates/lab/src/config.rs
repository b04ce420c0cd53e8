//! Experiment configuration: per-experiment defaults, a JSON overlay with
//! unknown keys rejected, and command-line overrides on top.

use serde::{Deserialize, Serialize};
use szasz_core::funcspace::{catalog, make_geometric_grid, Grid};

use crate::LabError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Voronovskaya,
    Semigroup,
    KeliskyRivlin,
    Korovkin,
    WeakConvergence,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Voronovskaya,
        Experiment::Semigroup,
        Experiment::KeliskyRivlin,
        Experiment::Korovkin,
        Experiment::WeakConvergence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Voronovskaya => "voronovskaya",
            Experiment::Semigroup => "semigroup",
            Experiment::KeliskyRivlin => "kelisky-rivlin",
            Experiment::Korovkin => "korovkin",
            Experiment::WeakConvergence => "weak-convergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_max: f64,
    pub m: usize,
    pub dense_head: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { x_max: 50.0, m: 400, dense_head: 100 }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, LabError> {
        Ok(make_geometric_grid(self.x_max, self.m, self.dense_head)?)
    }
}

/// A fully resolved configuration. Every field is echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub n_ladder: Vec<u32>,
    pub alpha: f64,
    pub t: f64,
    pub function_label: String,
    pub samples: u64,
    pub seed: u64,
    pub tail_eps: f64,
    pub grid: GridConfig,
    pub output_path: Option<String>,
    pub format: Format,
    /// Starting points for pointwise comparisons.
    pub x_panel: Vec<f64>,
    /// Starting point of the weak-convergence runs.
    pub x: f64,
    /// Exponential rates of the Korovkin test functions.
    pub lambdas: Vec<f64>,
    /// Final-value tolerance (semigroup discrepancy, Korovkin norm error).
    pub tolerance: f64,
    pub ks_tolerance: f64,
    /// Accepted interval for the fitted log-log slope.
    pub slope_range: [f64; 2],
    /// Residuals at or below this are treated as exact reproduction.
    pub exact_tolerance: f64,
    /// Target for the truncated-kernel error budget.
    pub kernel_budget: f64,
    pub bernstein_n: u32,
    pub k_max: u32,
    /// Tolerance for the Kelisky-Rivlin final deviation.
    pub kr_tolerance: f64,
}

/// Partial configuration as read from a JSON file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigOverlay {
    pub experiment: Option<Experiment>,
    pub n_ladder: Option<Vec<u32>>,
    pub alpha: Option<f64>,
    pub t: Option<f64>,
    pub function_label: Option<String>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub tail_eps: Option<f64>,
    pub grid: Option<GridConfig>,
    pub output_path: Option<String>,
    pub format: Option<Format>,
    pub x_panel: Option<Vec<f64>>,
    pub x: Option<f64>,
    pub lambdas: Option<Vec<f64>>,
    pub tolerance: Option<f64>,
    pub ks_tolerance: Option<f64>,
    pub slope_range: Option<[f64; 2]>,
    pub exact_tolerance: Option<f64>,
    pub kernel_budget: Option<f64>,
    pub bernstein_n: Option<u32>,
    pub k_max: Option<u32>,
    pub kr_tolerance: Option<f64>,
}

impl ConfigOverlay {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        serde_json::from_str(text).map_err(|e| LabError::Config(format!("config: {e}")))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Fields set in `other` win.
    pub fn merged(self, other: ConfigOverlay) -> ConfigOverlay {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigOverlay { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            experiment, n_ladder, alpha, t, function_label, samples, seed, tail_eps, grid, output_path, format,
            x_panel, x, lambdas, tolerance, ks_tolerance, slope_range, exact_tolerance, kernel_budget,
            bernstein_n, k_max, kr_tolerance
        )
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let (n_ladder, function_label, samples) = match experiment {
            Experiment::Voronovskaya => (vec![4, 16, 64, 256, 1024], "exp1", 100_000),
            Experiment::Semigroup => (vec![8, 32, 128], "exp1", 100_000),
            Experiment::KeliskyRivlin => (vec![5], "e2", 100_000),
            Experiment::Korovkin => (vec![1, 10, 100, 1000], "exp1", 100_000),
            Experiment::WeakConvergence => (vec![10, 50, 250], "e1", 100_000),
        };
        let tolerance = match experiment {
            Experiment::Korovkin => 1e-2,
            _ => 0.02,
        };
        Self {
            experiment,
            n_ladder,
            alpha: 2.0,
            t: 1.0,
            function_label: function_label.into(),
            samples,
            seed: 20_240_601,
            tail_eps: 1e-12,
            grid: GridConfig::default(),
            output_path: None,
            format: Format::Csv,
            x_panel: vec![0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            x: 1.0,
            lambdas: vec![1.0, 2.0, 3.0],
            tolerance,
            ks_tolerance: 0.02,
            slope_range: [-0.65, -0.35],
            exact_tolerance: 1e-6,
            kernel_budget: 1e-9,
            bernstein_n: 5,
            k_max: 200,
            kr_tolerance: 1e-8,
        }
    }

    /// Defaults for `experiment` with `overlay` applied, then validated.
    pub fn resolve(experiment: Experiment, overlay: ConfigOverlay) -> Result<Self, LabError> {
        if let Some(e) = overlay.experiment {
            if e != experiment {
                return Err(LabError::Config(format!(
                    "config is for experiment `{}` but `{}` was requested",
                    e.name(),
                    experiment.name()
                )));
            }
        }
        let d = Self::defaults(experiment);
        let c = Self {
            experiment,
            n_ladder: overlay.n_ladder.unwrap_or(d.n_ladder),
            alpha: overlay.alpha.unwrap_or(d.alpha),
            t: overlay.t.unwrap_or(d.t),
            function_label: overlay.function_label.unwrap_or(d.function_label),
            samples: overlay.samples.unwrap_or(d.samples),
            seed: overlay.seed.unwrap_or(d.seed),
            tail_eps: overlay.tail_eps.unwrap_or(d.tail_eps),
            grid: overlay.grid.unwrap_or(d.grid),
            output_path: overlay.output_path.or(d.output_path),
            format: overlay.format.unwrap_or(d.format),
            x_panel: overlay.x_panel.unwrap_or(d.x_panel),
            x: overlay.x.unwrap_or(d.x),
            lambdas: overlay.lambdas.unwrap_or(d.lambdas),
            tolerance: overlay.tolerance.unwrap_or(d.tolerance),
            ks_tolerance: overlay.ks_tolerance.unwrap_or(d.ks_tolerance),
            slope_range: overlay.slope_range.unwrap_or(d.slope_range),
            exact_tolerance: overlay.exact_tolerance.unwrap_or(d.exact_tolerance),
            kernel_budget: overlay.kernel_budget.unwrap_or(d.kernel_budget),
            bernstein_n: overlay.bernstein_n.unwrap_or(d.bernstein_n),
            k_max: overlay.k_max.unwrap_or(d.k_max),
            kr_tolerance: overlay.kr_tolerance.unwrap_or(d.kr_tolerance),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: &str| Err(LabError::Config(m.into()));
        if self.n_ladder.is_empty() || self.n_ladder[0] == 0 {
            return bad("n_ladder must be nonempty with entries >= 1");
        }
        if self.n_ladder.windows(2).any(|w| w[1] <= w[0]) {
            return bad("n_ladder must be strictly increasing");
        }
        if catalog::by_label(&self.function_label).is_none() {
            return Err(LabError::Config(format!(
                "unknown function `{}`; known: {}",
                self.function_label,
                catalog::LABELS.join(", ")
            )));
        }
        if !(self.alpha >= 1.0) {
            return bad("alpha must be at least 1");
        }
        if !(self.t >= 0.0) || !self.t.is_finite() {
            return bad("t must be finite and nonnegative");
        }
        if !(self.tail_eps > 0.0 && self.tail_eps < 1.0) {
            return bad("tail_eps must lie in (0, 1)");
        }
        if self.samples < 2 {
            return bad("samples must be at least 2");
        }
        if self.x_panel.is_empty() || self.x_panel.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return bad("x_panel needs finite nonnegative points");
        }
        if !(self.x >= 0.0) || !self.x.is_finite() {
            return bad("x must be finite and nonnegative");
        }
        if self.lambdas.is_empty() || !(self.lambdas[0] > 0.0) || self.lambdas.windows(2).any(|w| w[1] <= w[0]) {
            return bad("lambdas must be positive and strictly increasing");
        }
        if self.slope_range[0] > self.slope_range[1] {
            return bad("slope_range must be [low, high]");
        }
        if [self.tolerance, self.ks_tolerance, self.exact_tolerance, self.kernel_budget, self.kr_tolerance]
            .iter()
            .any(|&v| !(v > 0.0))
        {
            return bad("tolerances must be positive");
        }
        if self.bernstein_n == 0 {
            return bad("bernstein_n must be at least 1");
        }
        self.grid.build()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for e in Experiment::ALL {
            ExperimentConfig::resolve(e, ConfigOverlay::default()).unwrap();
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigOverlay::from_json(r#"{"alpha": 2, "bogus": 1}"#).is_err());
        assert!(ConfigOverlay::from_json(r#"{"grid": {"x_max": 5, "m": 10, "dense_head": 0, "extra": 1}}"#).is_err());
    }

    #[test]
    fn overlay_wins_over_defaults() {
        let o = ConfigOverlay::from_json(r#"{"n_ladder": [2, 3, 9], "seed": 5, "function_label": "lorentz"}"#).unwrap();
        let c = ExperimentConfig::resolve(Experiment::Voronovskaya, o).unwrap();
        assert_eq!((c.n_ladder.as_slice(), c.seed, c.function_label.as_str()), (&[2, 3, 9][..], 5, "lorentz"));
        assert_eq!(c.alpha, 2.0);
    }

    #[test]
    fn invalid_configs_fail() {
        let resolve = |j: &str| ExperimentConfig::resolve(Experiment::Korovkin, ConfigOverlay::from_json(j).unwrap());
        assert!(resolve(r#"{"n_ladder": [4, 4]}"#).is_err());
        assert!(resolve(r#"{"function_label": "nope"}"#).is_err());
        assert!(resolve(r#"{"lambdas": [2, 1, 3]}"#).is_err());
        assert!(resolve(r#"{"experiment": "semigroup"}"#).is_err());
        assert!(resolve(r#"{"experiment": "korovkin"}"#).is_ok());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = ExperimentConfig::defaults(Experiment::WeakConvergence);
        let back: ExperimentConfig = serde_json::from_value(c.to_json()).unwrap();
        assert_eq!(back, c);
    }
}
