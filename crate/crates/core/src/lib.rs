//! Positive linear approximation operators on the half line and on `[0, 1]`,
//! their iterates viewed as Markov chains on the lattice `{i/n}`, and the
//! degenerate diffusions that arise as their scaling limits.
//!
//! The crate is `no_std` and needs only `alloc`. Everything here is a pure
//! function of its inputs; Monte Carlo routines take explicit seeds and a
//! worker partition so that results are reproducible bit for bit. Parallel
//! drivers, file formats and the command line live in `szasz-lab`.
//!
//! Module map:
//!
//! * [`funcspace`]: weights `1/(1+x^α)`, weighted sup-norms on grids,
//!   second derivatives and the catalog of test functions.
//! * [`operators`]: Szász–Mirakyan, Bernstein and Baskakov operators,
//!   Poisson moments and tail bounds.
//! * [`iterates`]: transition kernels, exact lattice iterates, chain
//!   sampling and the Kelisky–Rivlin limit.
//! * [`generator`]: limiting generators, Voronovskaya residuals, the
//!   constant `M_α` and rate bounds.
//! * [`diffusion`]: exact and Euler sampling of the Feller square-root
//!   diffusion and the Wright–Fisher diffusion.
//! * [`montecarlo`]: estimates, mergeable accumulators and stream
//!   derivation.
//! * [`stats`]: two-sample Kolmogorov–Smirnov distance.

#![no_std]

extern crate alloc;

pub mod diffusion;
pub mod error;
pub mod funcspace;
pub mod generator;
pub mod iterates;
pub mod montecarlo;
pub mod operators;
pub(crate) mod poisson;
pub mod stats;

pub use error::{Error, Result};
pub use funcspace::{catalog, Grid, TestFunction, Weight};
pub use montecarlo::MonteCarloEstimate;
pub use operators::{OperatorInstance, OperatorKind, TruncationPolicy};
