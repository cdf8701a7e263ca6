//! Nonlinear-interference (NLI) estimation for ultra-wideband WDM links.
//!
//! The crate models a multi-span fiber link in which the per-channel power
//! evolution is shaped by inter-channel stimulated Raman scattering (ISRS)
//! and by co- or counter-propagating Raman pumps. On top of the solved
//! power profiles it evaluates a closed-form per-channel NLI estimate and,
//! independently, a brute-force restricted GN integral that serves as the
//! numerical ground truth for the closed form.
//!
//! Pipeline stages, each usable on its own:
//!
//! 1. [`link`] — validated, SI-normalized link description ([`LinkSpec`]).
//! 2. [`solver`] — coupled Raman power-evolution equations per span,
//!    backward pumps handled as a two-point boundary value problem.
//! 3. [`fitter`] — two-segment three-parameter loss-model fits of each
//!    solved profile, split at the power minimum.
//! 4. [`engine`] — closed-form NLI per channel from the fitted segments.
//! 5. [`oracle`] — restricted GN double integral on the numeric profiles.
//!
//! The `raman-nli` binary exposes the same stages as CLI subcommands with
//! deterministic CSV outputs.

pub mod config;
pub mod engine;
pub mod fitter;
pub mod link;
pub mod oracle;
pub mod output;
pub mod solver;
pub mod units;

pub use engine::{MlFactors, NliReport};
pub use fitter::{SegmentFit, TwoSegmentFit};
pub use link::{Channel, FiberSpec, LinkSpec, Pump, RamanGainTable, SpanSpec};
pub use oracle::{ComparisonTable, OracleMode, OracleReport};
pub use solver::{LinkSolution, PowerProfile};

use thiserror::Error;

/// Top-level error for pipeline entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] link::ConfigError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Fit(#[from] fitter::FitError),
    #[error(transparent)]
    Engine(#[from] engine::EngineError),
    #[error(transparent)]
    Quadrature(#[from] oracle::QuadratureError),
}
