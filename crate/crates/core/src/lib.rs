//! Estimation and structure identification for time-varying-coefficient
//! additive models, fitted with B-spline regression in three steps, plus a
//! two-stage penalized refit that detects which coefficient curves are
//! constant and which additive functions are linear.
//!
//! Modules, bottom up:
//! - [`numerics`]: least squares, ridge solves, Gauss-Legendre quadrature
//!   and deterministic per-stream RNG.
//! - [`splines`]: clamped B-spline bases, derivative Gram matrices,
//!   Greville abscissae.
//! - [`model`]: datasets, component functions, normalization, fitted models.
//! - [`estimation`]: the three-step estimator and BIC selection of the
//!   segment length and knot count.
//! - [`identification`]: two-stage SCAD-penalized refit with LQA ridge
//!   iterations and BIC tuning of the penalty levels.
//! - [`simulation`]: synthetic data-generating processes, oracle and
//!   misspecified comparison fits, MISE, and a Monte Carlo harness.
//! - [`io`]: CSV and structured-text artifacts.

pub mod error;
pub mod estimation;
pub mod identification;
pub mod io;
pub mod model;
pub mod numerics;
pub mod simulation;
pub mod splines;

pub use error::{Error, Result};
pub use estimation::{fit_three_step, select_by_bic, EstimationConfig};
pub use identification::{identify, IdentificationResult, PenaltyConfig};
pub use model::{ComponentFunction, TimeSeriesDataset, VcamFit};
pub use numerics::RngStream;
pub use simulation::{
    generate_example1, generate_example2, run_monte_carlo, Example, MonteCarloReport, ScenarioSpec,
};
pub use splines::{build_basis, SplineBasis, SplineSpec};
