use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use szasz_lab::parallel::worker_count;
use szasz_lab::report::render;
use szasz_lab::{emit_report, run, ConfigOverlay, Experiment, ExperimentConfig, Format};

/// Numerical checks for Szász–Mirakyan operators, their iterates and
/// diffusion limits.
#[derive(Parser)]
#[command(name = "szasz", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Voronovskaya residuals against the M_α bound.
    Voronovskaya(Flags),
    /// Iterates P_n^[nt] f against the Feller semigroup.
    Semigroup(Flags),
    /// Bernstein iterates converging to the interpolating line.
    KeliskyRivlin(Flags),
    /// Korovkin closed forms and weighted approximation error.
    Korovkin(Flags),
    /// Chain terminal laws against exact Feller draws.
    WeakConvergence(Flags),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct Flags {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated n values.
    #[arg(long, value_delimiter = ',')]
    n_ladder: Option<Vec<u32>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Catalog label of the test function.
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

impl Flags {
    fn overlay(&self) -> ConfigOverlay {
        ConfigOverlay {
            n_ladder: self.n_ladder.clone(),
            alpha: self.alpha,
            t: self.t,
            function_label: self.f.clone(),
            samples: self.samples,
            seed: self.seed,
            output_path: self.out.clone(),
            format: self.format.map(|f| match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            }),
            ..ConfigOverlay::default()
        }
    }
}

fn execute(experiment: Experiment, flags: &Flags) -> anyhow::Result<bool> {
    let file = match &flags.config {
        Some(path) => ConfigOverlay::from_path(path)?,
        None => ConfigOverlay::default(),
    };
    let config = ExperimentConfig::resolve(experiment, file.merged(flags.overlay()))?;
    let report = run(&config, worker_count()).with_context(|| format!("running {}", experiment.name()))?;
    match &config.output_path {
        Some(path) => emit_report(&report.rows, path.as_ref(), config.format)?,
        None => print!("{}", render(&report.rows, config.format)?),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::Voronovskaya(f) => (Experiment::Voronovskaya, f),
        Command::Semigroup(f) => (Experiment::Semigroup, f),
        Command::KeliskyRivlin(f) => (Experiment::KeliskyRivlin, f),
        Command::Korovkin(f) => (Experiment::Korovkin, f),
        Command::WeakConvergence(f) => (Experiment::WeakConvergence, f),
    };
    match execute(experiment, flags) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
